use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sawecm::io::{self, RuleFile, RuleMetadata};
use sawecm::lp::{assemble_lp, extract_rule, solve_simplex, LpStatus, PivotRule};
use sawecm::problems::{
    evaluate_rule, gauss_legendre, integrand_matrices, monomial_family,
    snapshot_reconstruction_error, synthetic_manifold, vector_monomial_family, ClusterWindowing,
    ManifoldMode,
};
use sawecm::saw::{
    global_ecm, independent_rule, saw_ecm, AdaptiveRule, AugmentPolicy, SawOptions,
    SubspaceFamily, VisitOrder,
};
use sawecm::Error;

const EXIT_VERIFICATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sawecm",
    version,
    about = "Cubature rules with shared points and subspace-adaptive weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in benchmark family through the selection strategies and
    /// write rule files, sparsity dumps and a summary table.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        /// Comma-separated subset of strategies to run.
        #[arg(long, value_enum, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        #[command(flatten)]
        knobs: Knobs,
        #[command(flatten)]
        manifold: ManifoldArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Compute a rule for a family file and write it as JSON.
    Run {
        /// Family CSV file (see README for the format).
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_enum)]
        strategy: Strategy,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Check a rule file against a family file.
    Verify {
        #[arg(long)]
        rule: PathBuf,
        #[arg(long)]
        family: PathBuf,
        /// Maximum allowed per-subspace relative residual.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoName {
    /// Six scalar monomial subspaces x^0..x^5 on 20 Gauss points of [0, 1].
    PolyScalar,
    /// Twenty (1, x^mu) subspaces on 50 Gauss points of [0, 1].
    PolyVector,
    /// Synthetic snapshot manifold with overlapping clusters.
    Manifold,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    GlobalEcm,
    IndependentEcm,
    SawEcm,
    Lp,
}

impl Strategy {
    fn label(self) -> &'static str {
        match self {
            Strategy::GlobalEcm => "global-ecm",
            Strategy::IndependentEcm => "independent-ecm",
            Strategy::SawEcm => "saw-ecm",
            Strategy::Lp => "lp",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderingArg {
    Natural,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PivotArg {
    Bland,
    Dantzig,
}

#[derive(Args, Clone)]
struct Knobs {
    /// SVD truncation tolerance for the subspace bases.
    #[arg(long, default_value_t = 0.0)]
    svd_tol: f64,
    /// Visit order of the subspaces in the sequential selection.
    #[arg(long, value_enum, default_value_t = OrderingArg::Natural)]
    ordering: OrderingArg,
    /// Seed for random ordering and synthetic data generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ineffective-iteration threshold before the candidate set is enlarged.
    #[arg(long, default_value_t = 10)]
    lambda: usize,
    /// Row-norm floor below which candidate points are discarded.
    #[arg(long, default_value_t = 1e-6)]
    low_norm_floor: f64,
    /// Support threshold when reading indices off an LP solution.
    #[arg(long, default_value_t = 1e-10)]
    zero_floor: f64,
    /// Simplex pivot rule for the LP strategy.
    #[arg(long, value_enum, default_value_t = PivotArg::Bland)]
    pivot: PivotArg,
}

#[derive(Args, Clone)]
struct ManifoldArgs {
    /// Spatial points of the synthetic manifold demo.
    #[arg(long, default_value_t = 200)]
    spatial_points: usize,
    /// Snapshots of the synthetic manifold demo.
    #[arg(long, default_value_t = 400)]
    steps: usize,
    /// Number of overlapping clusters; defaults to steps - 2, the
    /// consecutive-triples limit.
    #[arg(long)]
    clusters: Option<usize>,
    /// SVD tolerance for the per-cluster displacement bases.
    #[arg(long, default_value_t = 1e-8)]
    displacement_tol: f64,
    /// Import snapshots from a CSV matrix file (header `M,P`; row = spatial
    /// point, column = snapshot) instead of generating them.
    #[arg(long)]
    snapshots: Option<PathBuf>,
}

impl Knobs {
    fn saw_options(&self, augment: AugmentPolicy) -> SawOptions {
        SawOptions {
            failure_threshold: self.lambda,
            low_norm_floor: self.low_norm_floor,
            augment,
            ..SawOptions::default()
        }
    }

    fn visit_order(&self) -> VisitOrder {
        match self.ordering {
            OrderingArg::Natural => VisitOrder::Natural,
            OrderingArg::Random => VisitOrder::SeededRandom(self.seed),
        }
    }

    fn pivot_rule(&self) -> PivotRule {
        match self.pivot {
            PivotArg::Bland => PivotRule::Bland,
            PivotArg::Dantzig => PivotRule::Dantzig,
        }
    }

    fn metadata(&self, strategy: Strategy) -> RuleMetadata {
        RuleMetadata {
            strategy: strategy.label().into(),
            svd_tolerance: self.svd_tol,
            ordering: match self.ordering {
                OrderingArg::Natural => "natural".into(),
                OrderingArg::Random => "random".into(),
            },
            seed: Some(self.seed),
            failure_threshold: self.lambda,
            low_norm_floor: self.low_norm_floor,
            zero_floor: (strategy == Strategy::Lp).then_some(self.zero_floor),
            pivot: (strategy == Strategy::Lp).then(|| match self.pivot {
                PivotArg::Bland => "bland".into(),
                PivotArg::Dantzig => "dantzig".into(),
            }),
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Subspace { source, .. } => exit_code_for(source),
        Error::NoConvergence { .. } | Error::NotOptimal { .. } | Error::SingularGram => {
            EXIT_CONVERGENCE
        }
        _ => EXIT_INPUT,
    }
}

fn run_strategy(
    strategy: Strategy,
    family: &SubspaceFamily,
    knobs: &Knobs,
    augment: AugmentPolicy,
) -> Result<AdaptiveRule, Error> {
    let options = knobs.saw_options(augment);
    match strategy {
        Strategy::SawEcm => saw_ecm(family, &options),
        Strategy::GlobalEcm => global_ecm(family, &options),
        Strategy::IndependentEcm => independent_rule(family, &options),
        Strategy::Lp => {
            let lp = assemble_lp(family, &options)?;
            let solution = solve_simplex(&lp, knobs.pivot_rule());
            if solution.status != LpStatus::Optimal {
                return Err(Error::NotOptimal {
                    status: solution.status,
                });
            }
            extract_rule(&solution, &lp, knobs.zero_floor)
        }
    }
}

struct DemoData {
    family: SubspaceFamily,
    augment: AugmentPolicy,
    reconstruction_error: Option<f64>,
}

fn build_demo_family(name: DemoName, knobs: &Knobs, manifold: &ManifoldArgs) -> Result<DemoData, Error> {
    let data = match name {
        DemoName::PolyScalar => {
            let grid = gauss_legendre(20, (0.0, 1.0));
            DemoData {
                family: monomial_family(&grid, &[0, 1, 2, 3, 4, 5]),
                augment: AugmentPolicy::Auto,
                reconstruction_error: None,
            }
        }
        DemoName::PolyVector => {
            let grid = gauss_legendre(50, (0.0, 1.0));
            let degrees: Vec<u32> = (0..20).collect();
            DemoData {
                family: vector_monomial_family(&grid, &degrees),
                augment: AugmentPolicy::Auto,
                reconstruction_error: None,
            }
        }
        DemoName::Manifold => {
            let snapshots = match &manifold.snapshots {
                Some(path) => io::read_snapshots(path)?,
                None => {
                    let grid = gauss_legendre(manifold.spatial_points, (0.0, 1.0));
                    synthetic_manifold(
                        &grid.points,
                        manifold.steps,
                        ManifoldMode::TravellingBump,
                        knobs.seed,
                    )
                }
            };
            let spatial_points = snapshots[0].len();
            let steps = snapshots.len();
            let grid = gauss_legendre(spatial_points, (0.0, 1.0));
            let clusters = manifold.clusters.unwrap_or(steps.saturating_sub(2));
            if clusters == 0 || clusters > steps {
                return Err(Error::ShapeMismatch(format!(
                    "cluster count {clusters} invalid for {steps} snapshots"
                )));
            }
            let windowing = ClusterWindowing::balanced(steps, clusters, 1);
            let family =
                integrand_matrices(&snapshots, &windowing, manifold.displacement_tol, &grid)?;
            let reconstruction =
                snapshot_reconstruction_error(&snapshots, &windowing, manifold.displacement_tol)?;
            DemoData {
                family,
                // Local-basis practice: the augmented bases also integrate the
                // domain volume, mirroring hyperreduction pipelines.
                augment: AugmentPolicy::Always,
                reconstruction_error: Some(reconstruction),
            }
        }
    };
    Ok(data)
}

fn cmd_demo(
    name: DemoName,
    strategies: Option<Vec<Strategy>>,
    knobs: &Knobs,
    manifold: &ManifoldArgs,
    out_dir: &Path,
) -> Result<(), (u8, String)> {
    let fail = |e: Error| (exit_code_for(&e), e.to_string());
    let strategies = strategies.unwrap_or_else(|| match name {
        // The LP route scales with k * M variables; it is opt-in for the
        // manifold study.
        DemoName::Manifold => vec![Strategy::GlobalEcm, Strategy::IndependentEcm, Strategy::SawEcm],
        _ => vec![
            Strategy::GlobalEcm,
            Strategy::IndependentEcm,
            Strategy::SawEcm,
            Strategy::Lp,
        ],
    });

    let mut data = build_demo_family(name, knobs, manifold).map_err(fail)?;
    data.family.svd_tolerance = knobs.svd_tol;
    data.family.ordering = knobs.visit_order();

    std::fs::create_dir_all(out_dir).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    io::write_family(&out_dir.join("family.csv"), &data.family)
        .map_err(|e| (EXIT_INPUT, e.to_string()))?;

    let points = data.family.point_count();
    let mut summary = String::from("strategy,points,max_residual,wall_time_s\n");
    for strategy in strategies {
        let started = Instant::now();
        let rule = run_strategy(strategy, &data.family, knobs, data.augment)
            .map_err(|e| (exit_code_for(&e), format!("{}: {e}", strategy.label())))?;
        let elapsed = started.elapsed().as_secs_f64();
        let mut report = evaluate_rule(&rule, &data.family);
        report.snapshot_reconstruction_error = data.reconstruction_error;

        let file = RuleFile::from_rule(&rule, points, knobs.metadata(strategy));
        file.save(&out_dir.join(format!("rule_{}.json", strategy.label())))
            .map_err(|e| (EXIT_INPUT, e.to_string()))?;
        io::write_sparsity(
            &out_dir.join(format!("sparsity_{}.csv", strategy.label())),
            strategy.label(),
            &rule,
            points,
        )
        .map_err(|e| (EXIT_INPUT, e.to_string()))?;

        summary.push_str(&format!(
            "{},{},{:e},{:.3}\n",
            strategy.label(),
            rule.card(),
            report.max_residual,
            elapsed
        ));
        println!(
            "{:16} points: {:4}  max residual: {:9.3e}  time: {:.3}s",
            strategy.label(),
            rule.card(),
            report.max_residual,
            elapsed
        );
    }
    if let Some(err) = data.reconstruction_error {
        println!("snapshot reconstruction error: {err:.3e}");
    }
    std::fs::write(out_dir.join("summary.csv"), summary)
        .map_err(|e| (EXIT_INPUT, e.to_string()))?;
    println!("artifacts written to {}", out_dir.display());
    Ok(())
}

fn cmd_run(
    family_path: &Path,
    strategy: Strategy,
    knobs: &Knobs,
    out_dir: &Path,
) -> Result<(), (u8, String)> {
    let mut family = io::read_family(family_path).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    family.svd_tolerance = knobs.svd_tol;
    family.ordering = knobs.visit_order();
    let rule = run_strategy(strategy, &family, knobs, AugmentPolicy::Auto)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;

    std::fs::create_dir_all(out_dir).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    let path = out_dir.join(format!("rule_{}.json", strategy.label()));
    let file = RuleFile::from_rule(&rule, family.point_count(), knobs.metadata(strategy));
    file.save(&path).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_verify(rule_path: &Path, family_path: &Path, tolerance: f64) -> Result<(), (u8, String)> {
    let family = io::read_family(family_path).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    let file = RuleFile::load(rule_path).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    if file.point_count != family.point_count() {
        return Err((
            EXIT_INPUT,
            format!(
                "rule was built for M = {}, family has M = {}",
                file.point_count,
                family.point_count()
            ),
        ));
    }
    if file.subspace_count != family.subspace_count() {
        return Err((
            EXIT_INPUT,
            format!(
                "rule was built for k = {}, family has k = {}",
                file.subspace_count,
                family.subspace_count()
            ),
        ));
    }
    let rule = file.to_rule().map_err(|e| (EXIT_INPUT, e.to_string()))?;
    let report = evaluate_rule(&rule, &family);
    let json = serde_json::json!({
        "per_subspace_relative_residual": report.per_subspace_relative_residual,
        "max_residual": report.max_residual,
        "tolerance": tolerance,
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
    if report.max_residual <= tolerance {
        Ok(())
    } else {
        Err((
            EXIT_VERIFICATION,
            format!(
                "max residual {:.3e} exceeds tolerance {:.3e}",
                report.max_residual, tolerance
            ),
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Demo {
            name,
            strategies,
            knobs,
            manifold,
            out_dir,
        } => cmd_demo(*name, strategies.clone(), knobs, manifold, out_dir),
        Command::Run {
            family,
            strategy,
            knobs,
            out_dir,
        } => cmd_run(family, *strategy, knobs, out_dir),
        Command::Verify {
            rule,
            family,
            tolerance,
        } => cmd_verify(rule, family, *tolerance),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
