//! The `groupwork` command line: dataset description, model fitting, game
//! analysis, the full pipeline and synthetic data generation.
//!
//! Exit codes are stable: 0 success, 1 usage error, 2 data validation error,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::builder::{group_games, stability_report, BuildError, GameConstructionConfig, GameMode};
use crate::conf::ConfigError;
use crate::core_lp::CoreStatus;
use crate::dataset::{DatasetError, SessionDataset};
use crate::game::{GameError, TUGame};
use crate::model::{compare, fit_dataset, MixedModelFit, MixedModelSpec, ModelError};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineError, StageError, GROUPING};
use crate::report::FitTableJson;
use crate::synth::{synthesize, GenConfig, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser)]
#[command(
    name = "groupwork",
    about = "Cooperative-game and multilevel analysis of collaborative sessions",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Per-student records CSV.
    #[arg(long)]
    records: PathBuf,
    /// Pairwise peer-rating CSV.
    #[arg(long)]
    ratings: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of a session dataset.
    Describe {
        #[command(flatten)]
        data: DataArgs,
        /// Emit JSON instead of the human-readable table.
        #[arg(long)]
        json: bool,
    },
    /// Fit a two-level random-intercept model.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Response column.
        #[arg(long)]
        response: String,
        /// Comma-separated fixed predictors.
        #[arg(long, value_delimiter = ',')]
        predictors: Vec<String>,
        /// Fit the intercept-only null model.
        #[arg(long)]
        null: bool,
        #[arg(long)]
        json: bool,
    },
    /// Build and analyze per-team cooperative games.
    Game {
        #[command(flatten)]
        game: GameArgs,
    },
    /// Run the full analysis pipeline and write the report.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        /// Pipeline configuration file (key = value).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for report.json and the per-table CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Recorded in the report; reruns with identical inputs are byte-identical.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Forward selection instead of best-single-predictor final models.
        #[arg(long)]
        stepwise: bool,
        /// Significance threshold for predictor screening.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Generate a synthetic dataset from a generator configuration.
    Synth {
        /// Generator configuration file (key = value).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for records.csv and ratings.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grouped five-number summaries as CSV (for external plotting).
    Summarize {
        #[command(flatten)]
        data: DataArgs,
        /// Grouping variable: personality_type, learning_style or team.
        #[arg(long)]
        by: String,
        /// Continuous variable to summarize.
        #[arg(long)]
        variable: String,
    },
}

#[derive(Args)]
struct GameArgs {
    /// Per-student records CSV (with --ratings; alternative to --game-file).
    #[arg(long, requires = "ratings")]
    records: Option<PathBuf>,
    #[arg(long, requires = "records")]
    ratings: Option<PathBuf>,
    /// A single game in the JSON exchange format instead of session data.
    #[arg(long, conflicts_with_all = ["records", "ratings", "team", "session", "mode"])]
    game_file: Option<PathBuf>,
    /// Game construction: opinion or contribution.
    #[arg(long, default_value = "opinion")]
    mode: String,
    /// Restrict to one team id (all teams otherwise).
    #[arg(long)]
    team: Option<String>,
    /// Restrict to one session id.
    #[arg(long)]
    session: Option<String>,
    /// Singleton scale κ1.
    #[arg(long, default_value_t = 1.0)]
    kappa1: f64,
    /// Coalition scale κ2.
    #[arg(long, default_value_t = 1.0)]
    kappa2: f64,
    #[command(subcommand)]
    action: GameAction,
}

#[derive(Subcommand, Clone)]
enum GameAction {
    /// Print the game(s) in the JSON exchange format.
    Build,
    /// Shapley value per player.
    Shapley,
    /// Core emptiness with a certificate allocation when nonempty.
    Core,
    /// Full stability report (JSON).
    Report,
}

/// A classified CLI failure: message plus exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::UnknownVariable { .. } | DatasetError::UnknownGrouping { .. } => {
                EXIT_USAGE
            }
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::UnknownColumn { .. }
            | ModelError::SpecOverlap { .. }
            | ModelError::DuplicatePredictor { .. }
            | ModelError::NotContinuous { .. }
            | ModelError::NotCategorical { .. } => EXIT_USAGE,
            ModelError::Convergence { .. } => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        let code = match &e {
            GameError::UnknownProperty { .. } | GameError::InvalidOrder { .. } => EXIT_USAGE,
            GameError::LpIterationBound => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        let code = match &e {
            BuildError::UnknownMode { .. } => EXIT_USAGE,
            BuildError::Game(game) => return Failure::from_game_ref(game, &e),
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn from_game_ref(game: &GameError, outer: &dyn std::fmt::Display) -> Self {
        let code = match game {
            GameError::LpIterationBound => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: outer.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e.source {
            StageError::Model(ModelError::Convergence { .. }) => EXIT_NUMERIC,
            StageError::Game(GameError::LpIterationBound) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successes, parse problems are usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Describe { data, json } => cmd_describe(&data, json),
        Command::Fit {
            data,
            response,
            predictors,
            null,
            json,
        } => cmd_fit(&data, &response, &predictors, null, json),
        Command::Game { game } => cmd_game(game),
        Command::Pipeline {
            data,
            config,
            out,
            seed,
            stepwise,
            alpha,
        } => cmd_pipeline(&data, config.as_deref(), &out, seed, stepwise, alpha),
        Command::Synth { config, seed, out } => cmd_synth(&config, seed, &out),
        Command::Summarize { data, by, variable } => cmd_summarize(&data, &by, &variable),
    }
}

fn cmd_summarize(data: &DataArgs, by: &str, variable: &str) -> Result<(), Failure> {
    let dataset = load_dataset(data)?;
    let rows = dataset.group_summaries(by, variable)?;
    println!("group,level,count,min,q1,median,q3,max");
    for r in rows {
        println!(
            "{},{},{},{},{},{},{},{}",
            r.group, r.level, r.count, r.min, r.q1, r.median, r.q3, r.max
        );
    }
    Ok(())
}

fn load_dataset(data: &DataArgs) -> Result<SessionDataset, Failure> {
    Ok(SessionDataset::load(&data.records, &data.ratings)?)
}

fn cmd_describe(data: &DataArgs, json: bool) -> Result<(), Failure> {
    let dataset = load_dataset(data)?;
    let report = dataset.describe()?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serialization")
        );
        return Ok(());
    }
    println!("records: {}", report.n_records);
    println!("groups:  {}", report.n_groups);
    let sizes: Vec<String> = report
        .group_sizes
        .iter()
        .map(|(size, count)| format!("{size} members: {count}"))
        .collect();
    println!("group sizes: {}", sizes.join(", "));
    println!();
    println!("{:<24} {:>10} {:>10}", "variable", "mean", "sd");
    for c in &report.continuous {
        let sd =
            c.sd.map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".to_string());
        println!("{:<24} {:>10.4} {:>10}", c.variable, c.mean, sd);
    }
    for cat in &report.categorical {
        println!();
        println!("{} levels:", cat.variable);
        for (level, count) in &cat.levels {
            println!("  {level:<14} {count}");
        }
    }
    Ok(())
}

fn print_fit_table(table: &FitTableJson) {
    println!(
        "response: {} (grouped by {})",
        table.response, table.grouping
    );
    println!(
        "{:<28} {:>12} {:>10} {:>12}",
        "fixed effect", "coefficient", "SE", "p"
    );
    for f in &table.fixed {
        println!(
            "{:<28} {:>12.4} {:>10.4} {:>12.4e}",
            f.name, f.coefficient, f.se, f.p_value
        );
    }
    println!(
        "{:<28} {:>12} {:>10} {:>12}",
        "random effect", "variance", "SE", "p"
    );
    println!(
        "{:<28} {:>12.4} {:>10.4} {:>12.4e}",
        "level 2 (between groups)",
        table.random.level2.variance,
        table.random.level2.se,
        table.random.level2.p_value
    );
    println!(
        "{:<28} {:>12.4} {:>10.4} {:>12.4e}",
        "level 1 (within groups)",
        table.random.level1.variance,
        table.random.level1.se,
        table.random.level1.p_value
    );
    println!(
        "variance shares: level 2 {:.1}%, level 1 {:.1}%",
        100.0 * table.variance_partition.level2_share,
        100.0 * table.variance_partition.level1_share
    );
    println!(
        "fit: loglik {:.4}, AIC {:.2}, BIC {:.2}, n {}, groups {}",
        table.fit.loglik, table.fit.aic, table.fit.bic, table.fit.n_obs, table.fit.n_groups
    );
    if let Some(cmp) = &table.comparison {
        println!(
            "vs null: LRT {:.4} (df {}), p {:.4e}, dAIC {:.2}, dBIC {:.2}",
            cmp.lrt_statistic, cmp.df, cmp.p_value, cmp.delta_aic, cmp.delta_bic
        );
    }
}

fn cmd_fit(
    data: &DataArgs,
    response: &str,
    predictors: &[String],
    null: bool,
    json: bool,
) -> Result<(), Failure> {
    if null && !predictors.is_empty() {
        return Err(Failure::usage(
            "--null and --predictors are mutually exclusive",
        ));
    }
    if !null && predictors.is_empty() {
        return Err(Failure::usage(
            "pass --null for the null model or --predictors for a full model",
        ));
    }
    let dataset = load_dataset(data)?;
    let refs: Vec<&str> = predictors.iter().map(String::as_str).collect();
    let spec = MixedModelSpec::new(response, &refs, GROUPING);
    let fitted: MixedModelFit = fit_dataset(&dataset, &spec)?;
    let comparison = if predictors.is_empty() {
        None
    } else {
        let null_fit = fit_dataset(&dataset, &MixedModelSpec::null_model(response, GROUPING))?;
        Some(compare(&null_fit, &fitted)?)
    };
    let table = FitTableJson::from_fit(&fitted, comparison.as_ref());
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&table).expect("table serialization")
        );
    } else {
        print_fit_table(&table);
    }
    Ok(())
}

fn game_config(args: &GameArgs) -> Result<GameConstructionConfig, Failure> {
    let mode: GameMode = args
        .mode
        .parse::<GameMode>()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mut config = match mode {
        GameMode::OpinionBased => GameConstructionConfig::opinion(),
        GameMode::ContributionBased => GameConstructionConfig::contribution(),
    };
    config.singleton_scale = args.kappa1;
    config.coalition_scale = args.kappa2;
    config.validate().map_err(Failure::from)?;
    Ok(config)
}

fn cmd_game(args: GameArgs) -> Result<(), Failure> {
    if let Some(path) = &args.game_file {
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("{}: {e}", path.display()),
        })?;
        let game = TUGame::from_json(&text)?;
        let players: Vec<String> = (1..=game.n()).map(|p| p.to_string()).collect();
        return game_action(&args.action, "game", &players, &game, true);
    }

    let (records, ratings) = match (&args.records, &args.ratings) {
        (Some(r), Some(s)) => (r.clone(), s.clone()),
        _ => return Err(Failure::usage("pass --records/--ratings or --game-file")),
    };
    let dataset = SessionDataset::load(&records, &ratings)?;
    let config = game_config(&args)?;
    let games = group_games(&dataset, &config)?;
    let selected: Vec<_> = games
        .iter()
        .filter(|gg| args.team.as_ref().is_none_or(|t| &gg.group.team_id == t))
        .filter(|gg| {
            args.session
                .as_ref()
                .is_none_or(|s| &gg.group.session_id == s)
        })
        .collect();
    if selected.is_empty() {
        return Err(Failure {
            code: EXIT_DATA,
            message: match (&args.team, &args.session) {
                (Some(t), _) => format!("unknown team id '{t}'"),
                (None, Some(s)) => format!("unknown session id '{s}'"),
                _ => "dataset has no teams".to_string(),
            },
        });
    }
    let single = selected.len() == 1;
    for gg in selected {
        game_action(
            &args.action,
            &gg.group.to_string(),
            &gg.students,
            &gg.game,
            single,
        )?;
    }
    Ok(())
}

fn game_action(
    action: &GameAction,
    group_id: &str,
    players: &[String],
    game: &TUGame,
    single: bool,
) -> Result<(), Failure> {
    match action {
        GameAction::Build => {
            // a single selected game prints the bare exchange object so the
            // output feeds straight back into --game-file; streams carry
            // the group and player mapping
            if single {
                println!("{}", game.to_json());
            } else {
                let line = serde_json::json!({
                    "group": group_id,
                    "players": players,
                    "game": game.to_exchange(),
                });
                println!("{}", serde_json::to_string(&line).expect("serialization"));
            }
        }
        GameAction::Shapley => {
            let phi = game.shapley();
            let values: BTreeMap<&str, f64> = players
                .iter()
                .map(String::as_str)
                .zip(phi.iter().copied())
                .collect();
            let line = serde_json::json!({ "group": group_id, "shapley": values });
            println!("{}", serde_json::to_string(&line).expect("serialization"));
        }
        GameAction::Core => match game.core_is_empty()? {
            CoreStatus::Empty { shortfall } => {
                let line = serde_json::json!({ "group": group_id, "core": "empty", "shortfall": shortfall });
                println!("{}", serde_json::to_string(&line).expect("serialization"));
            }
            CoreStatus::NonEmpty { certificate } => {
                let values: BTreeMap<&str, f64> = players
                    .iter()
                    .map(String::as_str)
                    .zip(certificate.iter().copied())
                    .collect();
                let line = serde_json::json!({ "group": group_id, "core": "non-empty", "certificate": values });
                println!("{}", serde_json::to_string(&line).expect("serialization"));
            }
        },
        GameAction::Report => {
            let report = stability_report(game, group_id)?;
            let json = crate::report::StabilityJson::from_report(&report, players);
            println!("{}", serde_json::to_string(&json).expect("serialization"));
        }
    }
    Ok(())
}

fn cmd_pipeline(
    data: &DataArgs,
    config_path: Option<&Path>,
    out: &Path,
    seed: u64,
    stepwise: bool,
    alpha: Option<f64>,
) -> Result<(), Failure> {
    let dataset = load_dataset(data)?;
    let mut config = match config_path {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if stepwise {
        config.stepwise = true;
    }
    if let Some(a) = alpha {
        if !(0.0..1.0).contains(&a) {
            return Err(Failure::usage(format!(
                "--alpha must be in (0, 1), got {a}"
            )));
        }
        config.alpha = a;
    }
    let report = run_pipeline(&dataset, &config, seed)?;
    let written = report.write(out)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_synth(config_path: &Path, seed: u64, out: &Path) -> Result<(), Failure> {
    let config = GenConfig::from_file(config_path)?;
    let output = synthesize(&config, seed)?;
    std::fs::create_dir_all(out).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", out.display()),
    })?;
    let records = out.join("records.csv");
    let ratings = out.join("ratings.csv");
    output.dataset.save(&records, &ratings)?;
    println!("wrote {}", records.display());
    println!("wrote {}", ratings.display());
    for (variable, count) in &output.clamps.per_variable {
        println!(
            "censored {}: {}/{} ({:.1}%)",
            variable,
            count.clamped,
            count.total,
            100.0 * count.fraction()
        );
    }
    Ok(())
}
