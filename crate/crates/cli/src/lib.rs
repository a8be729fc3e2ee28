//! Batch runs over a model config: classification scans, multiplicity reports, the
//! triangle example and the Schur self test. Every task writes `results.csv`, an
//! `evidence/` directory of TOML records and a plain-text `summary`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use starlike::boundary::EpsLadder;
use starlike::classification::{
    extend_compact_solution, grid, sample_ladder, scan, stieltjes_invert, ClassifyConfig,
    EnergyClassification, ScanSummary, Status,
};
use starlike::config::ModelConfig;
use starlike::graph::{JacobiCoefficients, StarLikeGraph};
use starlike::halfline::{detect_subordinate, DetectConfig};
use starlike::measure::{build_example_5_2, cached_prefix};
use starlike::mmatrix::{CompactModel, HalfLineSlice};
use starlike::multiplicity::{
    multiplicity_analysis, star_center, star_overlap_of, MultiplicityAnalysis, SpaceConfig,
};
use starlike::random::schur_suite;

pub const CSV_HEADER: &str = "E,root,status,ac,sing,kernel_dim,rank,dimS,bound,flags";

/// Max-norm tolerance of the self test.
pub const SELFTEST_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Scan,
    Classify,
    Multiplicity,
    StarOverlap,
    #[serde(rename = "example-5-2")]
    #[value(name = "example-5-2")]
    Example52,
    Selftest,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Scan => "scan",
            Task::Classify => "classify",
            Task::Multiplicity => "multiplicity",
            Task::StarOverlap => "star-overlap",
            Task::Example52 => "example-5-2",
            Task::Selftest => "selftest",
        }
    }

    fn needs_model(self) -> bool {
        !matches!(self, Task::Example52 | Task::Selftest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    ImTrace,
    Density,
    RatioEvidence,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ImTrace => "im-trace",
            PlotKind::Density => "density",
            PlotKind::RatioEvidence => "ratio-evidence",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "im-trace" => Ok(PlotKind::ImTrace),
            "density" => Ok(PlotKind::Density),
            "ratio-evidence" => Ok(PlotKind::RatioEvidence),
            _ => Err(CliError::Config(format!("unknown plot kind {s:?}"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] starlike::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(starlike::Error::Config(_) | starlike::Error::InvalidGraph(_)) => 2,
            CliError::Numerical(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Run settings, from the `[run]` table of a config file or from the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub task: Option<Task>,
    /// `MIN:MAX:COUNT`.
    pub grid: Option<String>,
    pub energies: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub eps_min: Option<f64>,
    pub threshold: Option<f64>,
    pub plots: Option<Vec<PlotKind>>,
    /// Half-line used by the density and ratio-evidence plots.
    pub root: Option<String>,
}

impl RunSection {
    /// Fields set in `over` win.
    pub fn overridden_by(self, over: RunSection) -> RunSection {
        RunSection {
            task: over.task.or(self.task),
            // an explicit grid replaces an explicit list and vice versa
            energies: if over.grid.is_some() {
                None
            } else {
                over.energies.or(self.energies)
            },
            grid: over.grid.or(self.grid),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            jobs: over.jobs.or(self.jobs),
            eps_min: over.eps_min.or(self.eps_min),
            threshold: over.threshold.or(self.threshold),
            plots: over.plots.or(self.plots),
            root: over.root.or(self.root),
        }
    }
}

/// A config file: optional `[run]` settings plus an optional model.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    pub run: RunSection,
    pub model: Option<ModelConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let run = match table.remove("run") {
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("[run]: {e}")))?,
            None => RunSection::default(),
        };
        let model = if table.is_empty() {
            None
        } else {
            Some(ModelConfig::from_toml_str(
                &toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?,
            )?)
        };
        Ok(ConfigFile { run, model })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Fully resolved run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub model: Option<ModelConfig>,
    pub energies: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub eps_min: f64,
    pub threshold: f64,
    pub plots: Vec<PlotKind>,
    pub root: Option<String>,
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("grid {s:?} is not MIN:MAX:COUNT"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    grid(min, max, count).map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    pub fn resolve(run: RunSection, model: Option<ModelConfig>) -> Result<Self> {
        let task = run
            .task
            .ok_or_else(|| CliError::Config("no task given".into()))?;
        if task.needs_model() && model.is_none() {
            return Err(CliError::Config(format!(
                "task {} needs a graph config",
                task.name()
            )));
        }
        let energies = match (&run.grid, &run.energies) {
            (Some(g), _) => parse_grid(g)?,
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => return Err(CliError::Config("empty energy list".into())),
            (None, None) => match task {
                Task::Example52 => vec![0.0],
                Task::Selftest => Vec::new(),
                _ => return Err(CliError::Config("no energy grid given".into())),
            },
        };
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(CliError::Config("energies must be finite".into()));
        }
        let eps_min = run.eps_min.unwrap_or(2f64.powi(-30));
        let threshold = run.threshold.unwrap_or(1e-8);
        if !(eps_min > 0.0) || !(threshold > 0.0) {
            return Err(CliError::Config(
                "eps-min and threshold must be positive".into(),
            ));
        }
        let jobs = run
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        let cfg = RunConfig {
            task,
            model,
            energies,
            out: run.out.unwrap_or_else(|| PathBuf::from("out")),
            seed: run.seed.unwrap_or(0),
            jobs,
            eps_min,
            threshold,
            plots: run.plots.unwrap_or_default(),
            root: run.root,
        };
        cfg.ladder()?;
        Ok(cfg)
    }

    pub fn ladder(&self) -> Result<EpsLadder> {
        let l = EpsLadder::default().floor(self.eps_min);
        l.validate()
            .map_err(|e| CliError::Config(format!("eps-min {}: {e}", self.eps_min)))?;
        Ok(l)
    }

    pub fn classify_config(&self) -> Result<ClassifyConfig> {
        Ok(ClassifyConfig {
            ladder: self.ladder()?,
            kernel_threshold: self.threshold,
            ..Default::default()
        })
    }

    pub fn space_config(&self) -> Result<SpaceConfig> {
        let mut s = SpaceConfig::default();
        s.classify.ladder = self.ladder()?;
        s.classify.kernel_threshold = self.threshold;
        Ok(s)
    }
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// Energies (or self-test cases) that failed or did not meet their checks.
    pub failures: usize,
    pub summary: String,
}

/// One CSV row.
#[derive(Clone, Debug, Default)]
pub struct Row {
    pub energy: f64,
    pub root: String,
    pub status: String,
    pub ac: Option<bool>,
    pub sing: Option<bool>,
    pub kernel_dim: Option<usize>,
    pub rank: Option<usize>,
    pub dim_s: Option<String>,
    pub bound: Option<usize>,
    pub flags: Vec<String>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Row {
    pub fn to_csv(&self) -> String {
        let b = |x: Option<bool>| x.map_or(String::new(), |v| u8::from(v).to_string());
        let n = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
        [
            self.energy.to_string(),
            csv_field(&self.root),
            csv_field(&self.status),
            b(self.ac),
            b(self.sing),
            n(self.kernel_dim),
            n(self.rank),
            self.dim_s.clone().unwrap_or_default(),
            n(self.bound),
            csv_field(&self.flags.join(";")),
        ]
        .join(",")
    }
}

fn error_row(energy: f64, e: &starlike::Error) -> Row {
    Row {
        energy,
        root: "*".into(),
        status: "error".into(),
        flags: vec![e.to_string()],
        ..Default::default()
    }
}

fn classification_rows(c: &EnergyClassification) -> Vec<Row> {
    c.records
        .iter()
        .map(|r| {
            let mut flags = c.flags.clone();
            if let Some(x) = &r.cross_check {
                flags.push(format!(
                    "cross-check={}",
                    if x.agrees { "agrees" } else { "disagrees" }
                ));
            }
            Row {
                energy: c.energy,
                root: r.root.clone(),
                status: r.status.label().to_string(),
                ac: Some(c.ac_support_member),
                sing: Some(c.singular_candidate),
                kernel_dim: Some(c.kernel_dim),
                ..Default::default()
            }
            .with_flags(flags)
        })
        .collect()
}

impl Row {
    fn with_flags(mut self, flags: Vec<String>) -> Self {
        self.flags = flags;
        self
    }
}

fn multiplicity_rows(a: &MultiplicityAnalysis) -> Vec<Row> {
    let r = &a.report;
    let dim = if r.dim_lower == r.dim_upper {
        r.dim_lower.to_string()
    } else {
        format!("{}-{}", r.dim_lower, r.dim_upper)
    };
    let mut flags: Vec<String> = r.fired.iter().map(|f| format!("bound={f}")).collect();
    if r.eigenvalue {
        flags.push("eigenvalue".into());
    }
    flags.extend(r.flags.iter().cloned());
    classification_rows(&a.classification)
        .into_iter()
        .map(|mut row| {
            row.rank = r.omega_rank;
            row.dim_s = Some(dim.clone());
            row.bound = r.bound;
            row.flags = flags.clone();
            row
        })
        .collect()
}

fn count(summary: &mut ScanSummary, c: &EnergyClassification) {
    match c.status {
        Status::Ac => summary.ac += 1,
        Status::Singular => summary.singular += 1,
        Status::Both => summary.both += 1,
        Status::Neither => summary.neither += 1,
        Status::Inconclusive => summary.inconclusive += 1,
    }
}

fn summary_counts(s: &ScanSummary) -> String {
    format!(
        "ac {}\nsingular {}\nac+singular {}\nneither {}\ninconclusive {}\nerrors {}\n",
        s.ac, s.singular, s.both, s.neither, s.inconclusive, s.errors
    )
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value)
        .map_err(|e| CliError::Config(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct ScanEvidence<'a> {
    eps: &'a [f64],
    point: Vec<ScanPoint<'a>>,
}

#[derive(Serialize)]
struct ScanPoint<'a> {
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<&'a EnergyClassification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct LadderTrace {
    root: String,
    /// `1/m` at `E + i eps_j`.
    reciprocal_re: Vec<f64>,
    reciprocal_im: Vec<f64>,
}

#[derive(Serialize)]
struct ExtensionEvidence {
    candidate: usize,
    residual: f64,
    methods: Vec<(String, String)>,
}

#[derive(Serialize)]
struct ClassifyEvidence {
    energy: f64,
    eps: Vec<f64>,
    classification: EnergyClassification,
    ladder: Vec<LadderTrace>,
    extension: Vec<ExtensionEvidence>,
}

fn ladder_traces(
    model: &CompactModel,
    energy: f64,
    ladder: &EpsLadder,
) -> starlike::Result<Vec<LadderTrace>> {
    model
        .slices()
        .iter()
        .filter(|s| matches!(s, HalfLineSlice::HalfLine { .. }))
        .map(|s| {
            let v = ladder
                .eps
                .iter()
                .map(|&h| s.reciprocal(Complex64::new(energy, h)))
                .collect::<starlike::Result<Vec<_>>>()?;
            Ok(LadderTrace {
                root: s.root().to_string(),
                reciprocal_re: v.iter().map(|x| x.re).collect(),
                reciprocal_im: v.iter().map(|x| x.im).collect(),
            })
        })
        .collect()
}

fn classify_evidence(
    model: &CompactModel,
    c: EnergyClassification,
    ladder: &EpsLadder,
) -> starlike::Result<ClassifyEvidence> {
    let traces = ladder_traces(model, c.energy, ladder)?;
    let mut extension = Vec::new();
    for (i, cand) in c.candidates.iter().enumerate() {
        let x = extend_compact_solution(model, cand, 4096)?;
        extension.push(ExtensionEvidence {
            candidate: i,
            residual: x.residual,
            methods: x
                .branches
                .iter()
                .map(|b| (b.root.clone(), format!("{:?}", b.method).to_lowercase()))
                .collect(),
        });
    }
    Ok(ClassifyEvidence {
        energy: c.energy,
        eps: ladder.eps.clone(),
        classification: c,
        ladder: traces,
        extension,
    })
}

struct Output {
    rows: Vec<Row>,
    summary: String,
    failures: usize,
}

fn build_model(cfg: &RunConfig) -> Result<(StarLikeGraph, JacobiCoefficients)> {
    match &cfg.model {
        Some(m) => Ok(m.build()?),
        None => Err(CliError::Config("no graph in config".into())),
    }
}

fn evidence_name(i: usize) -> String {
    format!("{i:04}.toml")
}

fn task_scan(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let (g, c) = build_model(cfg)?;
    let ccfg = ClassifyConfig {
        cross_check: false,
        ..cfg.classify_config()?
    };
    let result = scan(&g, &c, &cfg.energies, &ccfg)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (e, p) in &result.points {
        match p {
            Ok(c) => {
                rows.extend(classification_rows(c));
                points.push(ScanPoint {
                    energy: *e,
                    classification: Some(c),
                    error: None,
                });
            }
            Err(err) => {
                rows.push(error_row(*e, err));
                points.push(ScanPoint {
                    energy: *e,
                    classification: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }
    write_toml(
        &evidence.join("scan.toml"),
        &ScanEvidence {
            eps: &ccfg.ladder.eps,
            point: points,
        },
    )?;
    Ok(Output {
        rows,
        summary: summary_counts(&result.summary),
        failures: result.summary.errors,
    })
}

fn task_classify(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let (g, c) = build_model(cfg)?;
    let ccfg = cfg.classify_config()?;
    let model = CompactModel::new(&g, &c)?;
    let results: Vec<starlike::Result<ClassifyEvidence>> = cfg
        .energies
        .par_iter()
        .map(|&e| {
            starlike::classification::classify_model(&model, e, &ccfg)
                .and_then(|c| classify_evidence(&model, c, &ccfg.ladder))
        })
        .collect();
    let mut rows = Vec::new();
    let mut summary = ScanSummary::default();
    for (i, (e, r)) in cfg.energies.iter().zip(&results).enumerate() {
        match r {
            Ok(ev) => {
                rows.extend(classification_rows(&ev.classification));
                count(&mut summary, &ev.classification);
                write_toml(&evidence.join(evidence_name(i)), ev)?;
            }
            Err(err) => {
                summary.errors += 1;
                rows.push(error_row(*e, err));
            }
        }
    }
    Ok(Output {
        rows,
        summary: summary_counts(&summary),
        failures: summary.errors,
    })
}

fn analyses(
    model: &CompactModel,
    energies: &[f64],
    scfg: &SpaceConfig,
) -> Vec<starlike::Result<MultiplicityAnalysis>> {
    energies
        .par_iter()
        .map(|&e| multiplicity_analysis(model, e, scfg))
        .collect()
}

fn task_multiplicity(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let (g, c) = build_model(cfg)?;
    let model = CompactModel::new(&g, &c)?;
    let results = analyses(&model, &cfg.energies, &cfg.space_config()?);
    let mut rows = Vec::new();
    let mut summary = ScanSummary::default();
    let mut text = String::new();
    for (i, (e, r)) in cfg.energies.iter().zip(&results).enumerate() {
        match r {
            Ok(a) => {
                rows.extend(multiplicity_rows(a));
                count(&mut summary, &a.classification);
                write_toml(&evidence.join(evidence_name(i)), a)?;
                let _ = writeln!(
                    text,
                    "E = {e}: dim S in [{}, {}], omega rank {}, bound {}{}",
                    a.report.dim_lower,
                    a.report.dim_upper,
                    a.report.omega_rank.map_or("-".into(), |r| r.to_string()),
                    a.report.bound.map_or("-".into(), |b| b.to_string()),
                    if a.report.eigenvalue {
                        ", eigenvalue"
                    } else {
                        ""
                    }
                );
            }
            Err(err) => {
                summary.errors += 1;
                rows.push(error_row(*e, err));
            }
        }
    }
    Ok(Output {
        rows,
        summary: summary_counts(&summary) + &text,
        failures: summary.errors,
    })
}

fn task_star_overlap(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let (g, c) = build_model(cfg)?;
    star_center(&g).map_err(|e| CliError::Config(e.to_string()))?;
    let model = CompactModel::new(&g, &c)?;
    let ccfg = ClassifyConfig {
        cross_check: false,
        ..cfg.classify_config()?
    };
    let results: Vec<
        starlike::Result<(EnergyClassification, starlike::multiplicity::StarOverlap)>,
    > = cfg
        .energies
        .par_iter()
        .map(|&e| {
            let c = starlike::classification::classify_model(&model, e, &ccfg)?;
            let s = star_overlap_of(&model, &c)?;
            Ok((c, s))
        })
        .collect();
    let mut rows = Vec::new();
    let mut counts = [0usize; 3];
    let mut failures = 0;
    for (i, (e, r)) in cfg.energies.iter().zip(&results).enumerate() {
        match r {
            Ok((c, s)) => {
                counts[match s.class {
                    starlike::multiplicity::OverlapClass::Multiple => 0,
                    starlike::multiplicity::OverlapClass::Single => 1,
                    starlike::multiplicity::OverlapClass::Neither => 2,
                }] += 1;
                for (row, (_, member)) in classification_rows(c).into_iter().zip(&s.memberships) {
                    let mut flags = vec![format!("class={}", s.class.label())];
                    if *member {
                        flags.push("member".into());
                    }
                    rows.push(
                        Row {
                            bound: s.bound,
                            sing: Some(s.in_s),
                            ..row
                        }
                        .with_flags(flags),
                    );
                }
                write_toml(&evidence.join(evidence_name(i)), s)?;
            }
            Err(err) => {
                failures += 1;
                rows.push(error_row(*e, err));
            }
        }
    }
    let summary = format!(
        "S1 {}\nS2nS {}\nneither {}\nerrors {failures}\n",
        counts[0], counts[1], counts[2]
    );
    Ok(Output {
        rows,
        summary,
        failures,
    })
}

/// Checks made on the triangle example at `E = 0`.
pub fn example_checks(a: &MultiplicityAnalysis) -> Vec<(String, bool)> {
    let r = &a.report;
    let sp = &a.space;
    let psi = sp.elements.iter().find(|x| x.vanishes_on("v3"));
    let psi_tilde = sp.elements.iter().find(|x| x.vanishes_on("v2"));
    vec![
        (
            "singular candidate".into(),
            a.classification.singular_candidate,
        ),
        ("dim S = 2".into(), r.dim_lower == 2 && r.dim_upper == 2),
        ("omega rank = 1".into(), r.omega_rank == Some(1)),
        ("eigenvalue flag".into(), r.eigenvalue),
        (
            "psi vanishes on v3 and is square summable".into(),
            psi.is_some_and(|x| x.square_summable),
        ),
        (
            "psi~ vanishes on v2 and is not square summable".into(),
            psi_tilde.is_some_and(|x| !x.square_summable),
        ),
        ("bound 2".into(), r.bound == Some(2)),
    ]
}

fn task_example(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let (g, c) = build_example_5_2();
    let model = CompactModel::new(&g, &c)?;
    let results = analyses(&model, &cfg.energies, &cfg.space_config()?);
    let mut rows = Vec::new();
    let mut text = String::new();
    let mut failures = 0;
    for (i, (e, r)) in cfg.energies.iter().zip(&results).enumerate() {
        match r {
            Ok(a) => {
                rows.extend(multiplicity_rows(a));
                write_toml(&evidence.join(evidence_name(i)), a)?;
                let _ = writeln!(
                    text,
                    "E = {e}: dim S in [{}, {}], omega rank {}, bound {}{}",
                    a.report.dim_lower,
                    a.report.dim_upper,
                    a.report.omega_rank.map_or("-".into(), |r| r.to_string()),
                    a.report.bound.map_or("-".into(), |b| b.to_string()),
                    if a.report.eigenvalue {
                        ", eigenvalue"
                    } else {
                        ""
                    }
                );
                if *e == 0.0 {
                    for (name, ok) in example_checks(a) {
                        let _ = writeln!(text, "  [{}] {name}", if ok { "pass" } else { "FAIL" });
                        failures += usize::from(!ok);
                    }
                }
            }
            Err(err) => {
                failures += 1;
                rows.push(error_row(*e, err));
            }
        }
    }
    Ok(Output {
        rows,
        summary: text,
        failures,
    })
}

fn task_selftest(cfg: &RunConfig, evidence: &Path) -> Result<Output> {
    let cases = schur_suite(cfg.seed, 50, 10)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for c in &cases {
        let ok = c.error <= SELFTEST_TOLERANCE;
        failures += usize::from(!ok);
        worst = worst.max(c.error);
        rows.push(Row {
            energy: c.z.re,
            root: format!("g{}", c.graph),
            status: if ok { "pass" } else { "fail" }.into(),
            flags: vec![
                format!("im={}", c.z.im),
                format!("n={}", c.n),
                format!("k={}", c.k),
                format!("error={:e}", c.error),
            ],
            ..Default::default()
        });
    }
    #[derive(Serialize)]
    struct Cases<'a> {
        seed: u64,
        tolerance: f64,
        case: &'a [starlike::random::SchurCase],
    }
    write_toml(
        &evidence.join("selftest.toml"),
        &Cases {
            seed: cfg.seed,
            tolerance: SELFTEST_TOLERANCE,
            case: &cases,
        },
    )?;
    let summary = format!(
        "cases {}\nfailed {failures}\nworst error {worst:e}\ntolerance {SELFTEST_TOLERANCE:e}\n",
        cases.len()
    );
    Ok(Output {
        rows,
        summary,
        failures,
    })
}

/// Executes the task and writes `results.csv`, `evidence/`, `summary` and any plot files.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<Outcome> {
    let evidence = cfg.out.join("evidence");
    fs::create_dir_all(&evidence)
        .map_err(|e| CliError::Config(format!("{}: {e}", evidence.display())))?;
    let out = match cfg.task {
        Task::Scan => task_scan(cfg, &evidence)?,
        Task::Classify => task_classify(cfg, &evidence)?,
        Task::Multiplicity => task_multiplicity(cfg, &evidence)?,
        Task::StarOverlap => task_star_overlap(cfg, &evidence)?,
        Task::Example52 => task_example(cfg, &evidence)?,
        Task::Selftest => task_selftest(cfg, &evidence)?,
    };
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &out.rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    fs::write(cfg.out.join("results.csv"), csv)?;

    if !cfg.plots.is_empty() {
        let (g, c) = match cfg.task {
            Task::Example52 => build_example_5_2(),
            Task::Selftest => {
                return Err(CliError::Config("the self test has no plot data".into()))
            }
            _ => build_model(cfg)?,
        };
        let model = CompactModel::new(&g, &c)?;
        for &kind in &cfg.plots {
            emit_plot_data(
                &model,
                &cfg.energies,
                kind,
                &cfg.ladder()?,
                cfg.root.as_deref(),
                &cfg.out,
            )?;
        }
    }

    let mut summary = format!("task {}\n", cfg.task.name());
    if !cfg.energies.is_empty() {
        let _ = writeln!(summary, "points {}", cfg.energies.len());
    }
    summary.push_str(&out.summary);
    fs::write(cfg.out.join("summary"), &summary)?;
    Ok(Outcome {
        failures: out.failures,
        summary,
    })
}

fn pick_root<'a>(model: &'a CompactModel, root: Option<&str>) -> Result<&'a HalfLineSlice> {
    let halflines: Vec<&HalfLineSlice> = model
        .slices()
        .iter()
        .filter(|s| matches!(s, HalfLineSlice::HalfLine { .. }))
        .collect();
    match root {
        Some(r) => halflines
            .into_iter()
            .find(|s| s.root() == r)
            .ok_or_else(|| CliError::Config(format!("no half-line at {r:?}"))),
        None => halflines
            .first()
            .copied()
            .ok_or_else(|| CliError::Config("model has no half-line".into())),
    }
}

/// Writes `<kind>.dat` with two columns `E value` and returns its path.
///
/// * `im-trace`: `Im tr M(E + i eps_min)`.
/// * `density`: Stieltjes inversion of the chosen branch. A measure-derived branch is
///   inverted through the measure's own Weyl function, otherwise `m_k` is used.
/// * `ratio-evidence`: last norm ratio recorded by the subordinacy detector on the branch.
pub fn emit_plot_data(
    model: &CompactModel,
    energies: &[f64],
    kind: PlotKind,
    ladder: &EpsLadder,
    root: Option<&str>,
    dir: &Path,
) -> Result<PathBuf> {
    if energies.is_empty() {
        return Err(CliError::Config("no energies to plot".into()));
    }
    let values: Vec<f64> = match kind {
        PlotKind::ImTrace => {
            let h = ladder.min();
            energies
                .par_iter()
                .map(|&e| model.assemble(Complex64::new(e, h)).map(|m| m.im_trace()))
                .collect::<starlike::Result<Vec<_>>>()?
        }
        PlotKind::Density => {
            let slice = pick_root(model, root)?;
            let spectral = slice
                .evaluator()
                .and_then(|ev| ev.operator().spectral().cloned());
            let samples = match spectral {
                Some(sb) => {
                    let prefix = cached_prefix(&sb.measure, sb.depth)?;
                    sample_ladder(energies, ladder, |z| Ok(prefix.m(z)))?
                }
                None => sample_ladder(energies, ladder, |z| Ok(1.0 / slice.reciprocal(z)?))?,
            };
            stieltjes_invert(&samples)
                .points
                .iter()
                .map(|p| p.density.unwrap_or(f64::NAN))
                .collect()
        }
        PlotKind::RatioEvidence => {
            let slice = pick_root(model, root)?;
            let op = slice
                .evaluator()
                .map(|ev| ev.operator().clone())
                .ok_or_else(|| CliError::Config("singleton slice".into()))?;
            let dcfg = DetectConfig::default();
            energies
                .par_iter()
                .map(|&e| {
                    detect_subordinate(&op, e, &dcfg)
                        .map(|v| v.evidence.last().map_or(f64::NAN, |p| p.1))
                })
                .collect::<starlike::Result<Vec<_>>>()?
        }
    };
    let mut text = format!("# E {}\n", kind.name());
    for (e, v) in energies.iter().zip(&values) {
        let _ = writeln!(text, "{e} {v}");
    }
    let path = dir.join(format!("{}.dat", kind.name()));
    fs::write(&path, text)?;
    Ok(path)
}
