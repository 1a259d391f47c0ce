//! Referee parser tree.
//!
//! Three levels: the game-action split decides whether robots halt, the
//! game-status split separates positioning situations from live play, and the
//! planning split picks between dynamic formation (move without touching the
//! ball), a planned tactic (set play) and the normal game tactic. Every input
//! lands on exactly one [`GameStateLeaf`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefParseError {
    #[error("unknown referee command `{0}`")]
    UnknownCommand(String),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("unknown team `{0}`")]
    UnknownTeam(String),
    #[error("line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Blue,
    Yellow,
}

impl Team {
    pub const ALL: [Team; 2] = [Team::Blue, Team::Yellow];

    fn token(self) -> &'static str {
        match self {
            Team::Blue => "BLUE",
            Team::Yellow => "YELLOW",
        }
    }
}

impl FromStr for Team {
    type Err = RefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BLUE" => Ok(Team::Blue),
            "YELLOW" => Ok(Team::Yellow),
            _ => Err(RefParseError::UnknownTeam(s.to_string())),
        }
    }
}

/// Referee command as sent, with the team it addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Command {
    Halt,
    Stop,
    ForceStart,
    NormalStart,
    PrepareKickoff(Team),
    PreparePenalty(Team),
    DirectFree(Team),
    BallPlacement(Team),
    Timeout(Team),
}

impl Command {
    pub fn all() -> Vec<Command> {
        let mut out = vec![Command::Halt, Command::Stop, Command::ForceStart, Command::NormalStart];
        for team in Team::ALL {
            out.extend([
                Command::PrepareKickoff(team),
                Command::PreparePenalty(team),
                Command::DirectFree(team),
                Command::BallPlacement(team),
                Command::Timeout(team),
            ]);
        }
        out
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, team) = match *self {
            Command::Halt => ("HALT", None),
            Command::Stop => ("STOP", None),
            Command::ForceStart => ("FORCE_START", None),
            Command::NormalStart => ("NORMAL_START", None),
            Command::PrepareKickoff(t) => ("PREPARE_KICKOFF", Some(t)),
            Command::PreparePenalty(t) => ("PREPARE_PENALTY", Some(t)),
            Command::DirectFree(t) => ("DIRECT_FREE", Some(t)),
            Command::BallPlacement(t) => ("BALL_PLACEMENT", Some(t)),
            Command::Timeout(t) => ("TIMEOUT", Some(t)),
        };
        match team {
            Some(t) => write!(f, "{name}_{}", t.token()),
            None => f.write_str(name),
        }
    }
}

impl FromStr for Command {
    type Err = RefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        match upper.as_str() {
            "HALT" => return Ok(Command::Halt),
            "STOP" => return Ok(Command::Stop),
            "FORCE_START" => return Ok(Command::ForceStart),
            "NORMAL_START" => return Ok(Command::NormalStart),
            _ => {}
        }
        let unknown = || RefParseError::UnknownCommand(s.to_string());
        let (name, team) = upper.rsplit_once('_').ok_or_else(unknown)?;
        let team: Team = team.parse().map_err(|_| unknown())?;
        match name {
            "PREPARE_KICKOFF" => Ok(Command::PrepareKickoff(team)),
            "PREPARE_PENALTY" => Ok(Command::PreparePenalty(team)),
            "DIRECT_FREE" => Ok(Command::DirectFree(team)),
            "BALL_PLACEMENT" => Ok(Command::BallPlacement(team)),
            "TIMEOUT" => Ok(Command::Timeout(team)),
            _ => Err(unknown()),
        }
    }
}

impl TryFrom<String> for Command {
    type Error = RefParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Command> for String {
    fn from(c: Command) -> Self {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Stage {
    FirstHalfPre,
    FirstHalf,
    HalfTime,
    SecondHalfPre,
    SecondHalf,
    OvertimePre,
    OvertimeHalves,
    PenaltyShootout,
    PostGame,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::FirstHalfPre,
        Stage::FirstHalf,
        Stage::HalfTime,
        Stage::SecondHalfPre,
        Stage::SecondHalf,
        Stage::OvertimePre,
        Stage::OvertimeHalves,
        Stage::PenaltyShootout,
        Stage::PostGame,
    ];

    fn token(self) -> &'static str {
        match self {
            Stage::FirstHalfPre => "FIRST_HALF_PRE",
            Stage::FirstHalf => "FIRST_HALF",
            Stage::HalfTime => "HALF_TIME",
            Stage::SecondHalfPre => "SECOND_HALF_PRE",
            Stage::SecondHalf => "SECOND_HALF",
            Stage::OvertimePre => "OVERTIME_PRE",
            Stage::OvertimeHalves => "OVERTIME_HALVES",
            Stage::PenaltyShootout => "PENALTY_SHOOTOUT",
            Stage::PostGame => "POST_GAME",
        }
    }

    /// Breaks where no robot is supposed to move.
    fn is_break(self) -> bool {
        matches!(self, Stage::HalfTime | Stage::PostGame)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Stage {
    type Err = RefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        Stage::ALL
            .into_iter()
            .find(|st| st.token() == upper)
            .ok_or_else(|| RefParseError::UnknownStage(s.to_string()))
    }
}

impl TryFrom<String> for Stage {
    type Error = RefParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Stage> for String {
    fn from(s: Stage) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefereeInput {
    pub command: Command,
    pub stage: Stage,
    /// Ball displaced from its restart position (computed from vision).
    pub ball_moved: bool,
    pub we_are: Team,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Us,
    Them,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrepareKind {
    KickoffUs,
    KickoffThem,
    PenaltyUs,
    PenaltyThem,
    FreekickThem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormationReason {
    Stop,
    BallPlacement(Side),
    Prepare(PrepareKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Play {
    KickoffUs,
    PenaltyUs,
    FreekickUs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameMode {
    Normal,
    TheirRestartAvoidance,
}

/// Output of the parser tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GameStateLeaf {
    #[default]
    Halt,
    DynamicFormation(FormationReason),
    PlannedTactic(Play),
    GameTactic(GameMode),
}

impl GameStateLeaf {
    /// Every leaf the parser can produce.
    pub fn all() -> Vec<GameStateLeaf> {
        use FormationReason as F;
        use GameStateLeaf as L;
        vec![
            L::Halt,
            L::DynamicFormation(F::Stop),
            L::DynamicFormation(F::BallPlacement(Side::Us)),
            L::DynamicFormation(F::BallPlacement(Side::Them)),
            L::DynamicFormation(F::Prepare(PrepareKind::KickoffUs)),
            L::DynamicFormation(F::Prepare(PrepareKind::KickoffThem)),
            L::DynamicFormation(F::Prepare(PrepareKind::PenaltyUs)),
            L::DynamicFormation(F::Prepare(PrepareKind::PenaltyThem)),
            L::DynamicFormation(F::Prepare(PrepareKind::FreekickThem)),
            L::PlannedTactic(Play::KickoffUs),
            L::PlannedTactic(Play::PenaltyUs),
            L::PlannedTactic(Play::FreekickUs),
            L::GameTactic(GameMode::Normal),
            L::GameTactic(GameMode::TheirRestartAvoidance),
        ]
    }

    pub fn is_dynamic_formation(&self) -> bool {
        matches!(self, GameStateLeaf::DynamicFormation(_))
    }

    /// Live play, where defense-area invasions count.
    pub fn is_in_play(&self) -> bool {
        matches!(self, GameStateLeaf::PlannedTactic(_) | GameStateLeaf::GameTactic(_))
    }
}

impl fmt::Display for GameStateLeaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameStateLeaf::Halt => f.write_str("HALT"),
            GameStateLeaf::DynamicFormation(reason) => {
                let r = match reason {
                    FormationReason::Stop => "STOP",
                    FormationReason::BallPlacement(Side::Us) => "BALL_PLACEMENT_US",
                    FormationReason::BallPlacement(Side::Them) => "BALL_PLACEMENT_THEM",
                    FormationReason::Prepare(PrepareKind::KickoffUs) => "PREPARE_KICKOFF_US",
                    FormationReason::Prepare(PrepareKind::KickoffThem) => "PREPARE_KICKOFF_THEM",
                    FormationReason::Prepare(PrepareKind::PenaltyUs) => "PREPARE_PENALTY_US",
                    FormationReason::Prepare(PrepareKind::PenaltyThem) => "PREPARE_PENALTY_THEM",
                    FormationReason::Prepare(PrepareKind::FreekickThem) => "FREEKICK_THEM",
                };
                write!(f, "DYNAMIC_FORMATION({r})")
            }
            GameStateLeaf::PlannedTactic(play) => {
                let p = match play {
                    Play::KickoffUs => "KICKOFF_US",
                    Play::PenaltyUs => "PENALTY_US",
                    Play::FreekickUs => "FREEKICK_US",
                };
                write!(f, "PLANNED_TACTIC({p})")
            }
            GameStateLeaf::GameTactic(GameMode::Normal) => f.write_str("GAME_TACTIC(NORMAL)"),
            GameStateLeaf::GameTactic(GameMode::TheirRestartAvoidance) => {
                f.write_str("GAME_TACTIC(THEIR_RESTART_AVOIDANCE)")
            }
        }
    }
}

fn side(team: Team, we_are: Team) -> Side {
    if team == we_are {
        Side::Us
    } else {
        Side::Them
    }
}

/// Maps one referee input, given the previous leaf, to the current leaf.
pub fn parse(input: &RefereeInput, previous: GameStateLeaf) -> GameStateLeaf {
    use FormationReason as F;
    use GameStateLeaf as L;

    // Game action: halt or not.
    if matches!(input.command, Command::Halt | Command::Timeout(_)) || input.stage.is_break() {
        return L::Halt;
    }

    let us = |t| side(t, input.we_are) == Side::Us;

    // Game status: positioning vs in-game, then the planning split.
    match input.command {
        Command::Halt | Command::Timeout(_) => L::Halt,
        Command::Stop => L::DynamicFormation(F::Stop),
        Command::BallPlacement(t) => L::DynamicFormation(F::BallPlacement(side(t, input.we_are))),
        Command::PrepareKickoff(t) => L::DynamicFormation(F::Prepare(if us(t) {
            PrepareKind::KickoffUs
        } else {
            PrepareKind::KickoffThem
        })),
        Command::PreparePenalty(t) => L::DynamicFormation(F::Prepare(if us(t) {
            PrepareKind::PenaltyUs
        } else {
            PrepareKind::PenaltyThem
        })),
        Command::ForceStart => L::GameTactic(GameMode::Normal),
        Command::DirectFree(t) => {
            if input.ball_moved {
                L::GameTactic(GameMode::Normal)
            } else if us(t) {
                L::PlannedTactic(Play::FreekickUs)
            } else {
                L::DynamicFormation(F::Prepare(PrepareKind::FreekickThem))
            }
        }
        Command::NormalStart => normal_start(previous, input.ball_moved),
    }
}

fn normal_start(previous: GameStateLeaf, ball_moved: bool) -> GameStateLeaf {
    use GameStateLeaf as L;
    if ball_moved {
        return L::GameTactic(GameMode::Normal);
    }
    match previous {
        L::DynamicFormation(FormationReason::Prepare(kind)) => match kind {
            PrepareKind::KickoffUs => L::PlannedTactic(Play::KickoffUs),
            PrepareKind::PenaltyUs => L::PlannedTactic(Play::PenaltyUs),
            PrepareKind::KickoffThem | PrepareKind::PenaltyThem | PrepareKind::FreekickThem => {
                L::GameTactic(GameMode::TheirRestartAvoidance)
            }
        },
        L::PlannedTactic(_) | L::GameTactic(_) => previous,
        L::Halt | L::DynamicFormation(_) => L::GameTactic(GameMode::Normal),
    }
}

/// Restrictions the planner applies in a given game state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GameConstraints {
    pub speed_cap: Option<f64>,
    pub ball_keepout: Option<f64>,
    pub defense_keepout_active: bool,
    pub may_touch_ball: bool,
}

/// League-rule numbers behind [`constraints_for`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintDefaults {
    pub stop_speed_cap: f64,
    pub ball_keepout: f64,
}

impl Default for ConstraintDefaults {
    fn default() -> Self {
        ConstraintDefaults {
            stop_speed_cap: 1.5,
            ball_keepout: 0.5,
        }
    }
}

pub fn constraints_for(leaf: GameStateLeaf) -> GameConstraints {
    constraints_with(leaf, &ConstraintDefaults::default())
}

pub fn constraints_with(leaf: GameStateLeaf, defaults: &ConstraintDefaults) -> GameConstraints {
    match leaf {
        GameStateLeaf::Halt => GameConstraints {
            speed_cap: Some(0.0),
            ball_keepout: None,
            defense_keepout_active: true,
            may_touch_ball: false,
        },
        GameStateLeaf::DynamicFormation(_) => GameConstraints {
            speed_cap: Some(defaults.stop_speed_cap),
            ball_keepout: Some(defaults.ball_keepout),
            defense_keepout_active: true,
            may_touch_ball: false,
        },
        GameStateLeaf::PlannedTactic(_) | GameStateLeaf::GameTactic(GameMode::Normal) => GameConstraints {
            speed_cap: None,
            ball_keepout: None,
            defense_keepout_active: true,
            may_touch_ball: true,
        },
        GameStateLeaf::GameTactic(GameMode::TheirRestartAvoidance) => GameConstraints {
            speed_cap: None,
            ball_keepout: Some(defaults.ball_keepout),
            defense_keepout_active: true,
            may_touch_ball: false,
        },
    }
}

/// One line of a referee replay log: `t command stage ball_moved`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefereeEvent {
    pub t: f64,
    pub command: Command,
    pub stage: Stage,
    pub ball_moved: bool,
}

/// Parsed replay log. A `team <color>` line sets our color (blue otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct RefereeLog {
    pub we_are: Team,
    pub events: Vec<RefereeEvent>,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

impl FromStr for RefereeLog {
    type Err = RefParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut we_are = Team::Blue;
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |message: String| RefParseError::Log { line, message };
            if fields[0].eq_ignore_ascii_case("team") {
                let color = fields.get(1).ok_or_else(|| err("missing team color".into()))?;
                we_are = color.parse().map_err(|e: RefParseError| err(e.to_string()))?;
                continue;
            }
            if fields.len() != 4 {
                return Err(err(format!(
                    "expected `t command stage ball_moved`, got {} fields",
                    fields.len()
                )));
            }
            let t: f64 = fields[0]
                .parse()
                .ok()
                .filter(|t: &f64| t.is_finite())
                .ok_or_else(|| err(format!("bad time `{}`", fields[0])))?;
            if let Some(prev) = events.last().map(|e: &RefereeEvent| e.t) {
                if t < prev {
                    return Err(err(format!("time {t} goes backwards")));
                }
            }
            let command = fields[1].parse().map_err(|e: RefParseError| err(e.to_string()))?;
            let stage = fields[2].parse().map_err(|e: RefParseError| err(e.to_string()))?;
            let ball_moved =
                parse_flag(fields[3]).ok_or_else(|| err(format!("bad ball_moved flag `{}`", fields[3])))?;
            events.push(RefereeEvent {
                t,
                command,
                stage,
                ball_moved,
            });
        }
        Ok(RefereeLog { we_are, events })
    }
}

impl RefereeLog {
    /// Runs the parser over the log, starting from `Halt`.
    pub fn leaf_timeline(&self) -> Vec<(f64, GameStateLeaf)> {
        let mut leaf = GameStateLeaf::Halt;
        self.events
            .iter()
            .map(|e| {
                let input = RefereeInput {
                    command: e.command,
                    stage: e.stage,
                    ball_moved: e.ball_moved,
                    we_are: self.we_are,
                };
                leaf = parse(&input, leaf);
                (e.t, leaf)
            })
            .collect()
    }
}
