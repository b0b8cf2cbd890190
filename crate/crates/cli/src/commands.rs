use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use boxlab::catalog::{
    b_in_maximal_flags, flag_box, local_deterministic_vertices, lrns_product_vertices, ns_extremal_vertices_2x2,
};
use boxlab::clp::{run_suite, standard_family, SuiteOptions};
use boxlab::cost::{nonlocal_cost_with, verify_certificate, Formulation};
use boxlab::discrimination::{
    conclusive_distinguish, corollary_alpha_bound, corollary_maxflags_bound, helstrom_lower_bound,
    perfect_distinguish_search, theorem1_bound, universal_bound_sweep, Aggregation, BoundReport, ConclusiveEvent,
    DiscriminationScenario, DistinguishStrategy,
};
use boxlab::json::{box_from_json, box_to_json, certificate_to_json, entries_from_json};
use boxlab::nonsignaling::is_fully_nonsignaling;
use boxlab::rational::{self, alpha_quantum, ALPHA_QUANTUM_DIGITS};
use boxlab::table::validate_entries;
use boxlab::transforms::{o_rotation_on, twirl_on, ComparingOperation};
use boxlab::{
    b_rst, isotropic, BoxError, BoxTable, CostProblem, IsotropicSpec, LocalModel, MaxNonlocalLabel, Rational,
    SystemLayout,
};
use serde_json::{json, Value};

use crate::manifest::{alongside, RunManifest};
use crate::{
    AggregateArg, BoundArgs, BoxCommand, CostArgs, DistinguishArgs, DistinguishMode, FormulaArg, ScenarioArg,
    SweepArgs, TransformArgs, TransformOp, VerifyArgs, VertexKindArg, VerticesArgs,
};

const DECIMAL_DIGITS: usize = 15;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    InvalidBox(String),
    CheckFailed(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::InvalidBox(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::InvalidBox(m) | CliError::CheckFailed(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<BoxError> for CliError {
    fn from(e: BoxError) -> Self {
        match e {
            BoxError::Invalid(_) => CliError::InvalidBox(e.to_string()),
            BoxError::Parse(_)
            | BoxError::Malformed(_)
            | BoxError::Argument(_)
            | BoxError::Layout(_)
            | BoxError::OutOfRange(_)
            | BoxError::Incompatible(_) => CliError::Usage(e.to_string()),
            BoxError::Contract(_) | BoxError::Solver(_) => CliError::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Reads inputs and writes outputs through one place so the manifest sees
/// every byte.
pub struct Session {
    manifest: RunManifest,
    manifest_path: Option<PathBuf>,
}

impl Session {
    pub fn new(command: Vec<String>, manifest_path: Option<PathBuf>) -> Self {
        Self {
            manifest: RunManifest::new(command),
            manifest_path,
        }
    }

    fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        self.manifest
            .read_input(path)
            .map_err(|e| CliError::Usage(format!("{e:#}")))
    }

    fn read_json(&mut self, path: &Path) -> CliResult<Value> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    fn read_box(&mut self, path: &Path) -> CliResult<BoxTable> {
        let v = self.read_json(path)?;
        box_from_json(&v).map_err(|e| match e {
            BoxError::Invalid(m) => CliError::InvalidBox(format!("{}: invalid box: {m}", path.display())),
            other => CliError::Usage(format!("{}: {other}", path.display())),
        })
    }

    /// Writes `text` to `out`, or to standard output.
    fn emit(&mut self, out: Option<&Path>, text: &str) -> CliResult {
        match out {
            Some(path) => {
                fs::write(path, text)
                    .map_err(|e| CliError::Runtime(anyhow::anyhow!("writing {}: {e}", path.display())))?;
                self.manifest
                    .record_output(&path.display().to_string(), text.as_bytes());
                self.manifest_path.get_or_insert_with(|| alongside(path));
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::Runtime(e.into()))?;
                self.manifest.record_output("-", text.as_bytes());
            }
        }
        Ok(())
    }

    pub fn finish(self) -> CliResult {
        if let Some(path) = &self.manifest_path {
            self.manifest.write(path)?;
        }
        Ok(())
    }
}

fn decimal(r: &Rational) -> String {
    rational::to_decimal(r, DECIMAL_DIGITS)
}

fn exact(r: &Rational) -> Value {
    json!({"exact": rational::format(r), "decimal": decimal(r)})
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn require_ns(b: &BoxTable, what: &str) -> CliResult {
    match is_fully_nonsignaling(b) {
        (true, _) => Ok(()),
        (false, w) => Err(CliError::InvalidBox(format!(
            "{what} is signaling: {}",
            w.map(|w| w.to_string()).unwrap_or_default()
        ))),
    }
}

fn parse_labels(s: &str) -> CliResult<Vec<MaxNonlocalLabel>> {
    s.split(',')
        .map(|l| l.trim().parse::<MaxNonlocalLabel>().map_err(CliError::from))
        .collect()
}

fn parse_rationals(s: &str) -> CliResult<Vec<Rational>> {
    s.split(',')
        .map(|r| rational::parse(r.trim()).map_err(CliError::from))
        .collect()
}

fn parse_pair(s: &str, what: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{what} must be two integers \"i,j\", got {s:?}")))?;
    match parts[..] {
        [i, j] => Ok((i, j)),
        _ => Err(CliError::Usage(format!(
            "{what} must be two integers \"i,j\", got {s:?}"
        ))),
    }
}

/// `aq` is the built-in rational approximation of `(2 + sqrt 2)/4`.
fn parse_alpha(s: &str, session: &mut Session) -> CliResult<Rational> {
    let alpha = if s == "aq" {
        alpha_quantum(ALPHA_QUANTUM_DIGITS)
    } else {
        rational::parse(s)?
    };
    session.manifest.alpha = Some(rational::format(&alpha));
    Ok(alpha)
}

/// Model tags name the vertex set; a count in the tag must match the
/// layout.
fn resolve_model(tag: Option<&str>, layout: &SystemLayout, session: &mut Session) -> CliResult<LocalModel> {
    let (model, count) = match tag.unwrap_or("det") {
        "det" => (LocalModel::Deterministic, None),
        "lrns" => (LocalModel::LrnsProducts, None),
        t if t.starts_with("det") => (LocalModel::Deterministic, Some(&t[3..])),
        t if t.starts_with("lrns") => (LocalModel::LrnsProducts, Some(&t[4..])),
        t => {
            return Err(CliError::Usage(format!(
                "unknown model {t:?}; use det16, det256, lrns576, det or lrns"
            )))
        }
    };
    let size = model.vertices(layout)?.len();
    if let Some(count) = count {
        if count.parse::<usize>().ok() != Some(size) {
            return Err(CliError::Usage(format!(
                "model {} has {size} vertices on {layout}, not {count}",
                tag.unwrap_or_default()
            )));
        }
    }
    let prefix = match model {
        LocalModel::Deterministic => "det",
        LocalModel::LrnsProducts => "lrns",
    };
    session.manifest.model = Some(format!("{prefix}{size}"));
    Ok(model)
}

pub fn cost(session: &mut Session, args: CostArgs) -> CliResult {
    let b = session.read_box(&args.input)?;
    require_ns(&b, "input box")?;
    let model = resolve_model(args.model.as_deref(), b.layout(), session)?;
    let problem = CostProblem::with_model(b, model)?;
    let formulation = if args.explicit {
        Formulation::Explicit
    } else {
        Formulation::Reduced
    };
    let cert = nonlocal_cost_with(&problem, formulation)?;
    let check = verify_certificate(&problem.target, &cert, &problem.local_model);
    if !check.is_ok() {
        return Err(CliError::CheckFailed(format!("certificate rejected: {check:?}")));
    }
    let tag = session.manifest.model.clone().unwrap_or_default();
    if let Some(path) = &args.emit_cert {
        session.emit(Some(path), &pretty(&certificate_to_json(&cert, &tag)))?;
    }
    let text = format!(
        "cost {}\ndecimal {}\nmodel {tag}\ncertificate verified\n",
        rational::format(&cert.p),
        decimal(&cert.p)
    );
    session.emit(None, &text)
}

fn bound_json(labels: &[MaxNonlocalLabel], alpha: &Rational, model: &str, report: &BoundReport) -> Value {
    json!({
        "formula": report.formula.to_string(),
        "model": model,
        "labels": labels.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
        "alpha": rational::format(alpha),
        "cost": exact(&report.cost_used),
        "bound": exact(&report.bound),
        "success_bound": report.success_bound.as_ref().map(exact),
    })
}

pub fn bound(session: &mut Session, args: BoundArgs) -> CliResult {
    let labels = parse_labels(&args.labels)?;
    let alpha = parse_alpha(&args.alpha, session)?;
    let model = resolve_model(Some(&args.model), &SystemLayout::abcd(), session)?;
    let weights = match &args.weights {
        Some(w) => parse_rationals(w)?,
        None => vec![rational::ratio(1, labels.len().max(1) as i64); labels.len()],
    };
    if weights.len() != labels.len() {
        return Err(CliError::Usage(format!(
            "{} weights for {} labels",
            weights.len(),
            labels.len()
        )));
    }
    let report = match args.formula {
        FormulaArg::CorollaryMaxflags => corollary_maxflags_bound(&labels, &weights, &alpha, model)?,
        FormulaArg::CorollaryAlpha => corollary_alpha_bound(&labels, &weights, &alpha, model)?,
        FormulaArg::Theorem1 => {
            let betas = match &args.betas {
                Some(b) => parse_rationals(b)?,
                None => vec![rational::one(); labels.len()],
            };
            let members = labels
                .iter()
                .zip(&weights)
                .map(|(&l, w)| Ok((w.clone(), IsotropicSpec::new(l, alpha.clone())?)))
                .collect::<Result<_, BoxError>>()?;
            theorem1_bound(&DiscriminationScenario::new(members, betas)?, model)?
        }
    };
    let tag = session.manifest.model.clone().unwrap_or_default();
    session.emit(None, &pretty(&bound_json(&labels, &alpha, &tag, &report)))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep(session: &mut Session, args: SweepArgs) -> CliResult {
    if !(1..=8).contains(&args.k) {
        return Err(CliError::Usage(format!("k must be in 1..=8, got {}", args.k)));
    }
    let alpha = parse_alpha(&args.alpha, session)?;
    let model = resolve_model(Some(&args.model), &SystemLayout::abcd(), session)?;
    let table = universal_bound_sweep(args.k, &alpha, model)?;
    let mut csv = String::from("ensemble,cost,bound,bound_decimal\n");
    for row in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&row.label_string()),
            rational::format(&row.cost),
            rational::format(&row.bound),
            decimal(&row.bound)
        ));
    }
    session.emit(args.out.as_deref(), &csv)?;
    if args.out.is_some() {
        let chosen = match args.aggregate {
            AggregateArg::Min => Aggregation::Min,
            AggregateArg::Max => Aggregation::Max,
        };
        let mut summary = String::new();
        for (name, aggregation) in [("min", Aggregation::Min), ("max", Aggregation::Max)] {
            let row = table.aggregate(aggregation);
            let marker = if aggregation == chosen { " *" } else { "" };
            summary.push_str(&format!(
                "{name} {} ({}) at {}{marker}\n",
                rational::format(&row.bound),
                decimal(&row.bound),
                row.label_string()
            ));
        }
        session.emit(None, &summary)?;
    }
    Ok(())
}

fn strategy_json(s: &DistinguishStrategy) -> Value {
    json!({
        "measurement": [s.operation.measurement.0, s.operation.measurement.1],
        "partition": s.operation.partition.iter()
            .map(|class| class.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "success_probability": exact(&s.success_probability),
    })
}

fn event_json(e: Option<ConclusiveEvent>) -> Value {
    match e {
        None => Value::Null,
        Some(e) => json!({
            "measurement": e.measurement,
            "outcomes": e.outcomes,
            "probability": exact(&e.probability),
        }),
    }
}

pub fn distinguish(session: &mut Session, args: DistinguishArgs) -> CliResult {
    let a = session.read_box(&args.a)?;
    let b = session.read_box(&args.b)?;
    let report = match args.mode {
        DistinguishMode::Helstrom => {
            let (bound, strategy) = helstrom_lower_bound(&a, &b)?;
            json!({"mode": "helstrom", "bound": exact(&bound), "strategy": strategy_json(&strategy)})
        }
        DistinguishMode::Perfect => {
            let found = perfect_distinguish_search(&a, &b)?;
            json!({
                "mode": "perfect",
                "found": found.is_some(),
                "strategy": found.as_ref().map(strategy_json),
            })
        }
        DistinguishMode::Conclusive => json!({
            "mode": "conclusive",
            "a_not_b": event_json(conclusive_distinguish(&a, &b)?),
            "b_not_a": event_json(conclusive_distinguish(&b, &a)?),
        }),
    };
    session.emit(None, &pretty(&report))
}

pub fn vertices(session: &mut Session, args: VerticesArgs) -> CliResult {
    let set = match (args.scenario, args.kind) {
        (ScenarioArg::TwoByTwo, VertexKindArg::Local) => local_deterministic_vertices(&SystemLayout::bipartite_2x2()),
        (ScenarioArg::Abcd, VertexKindArg::Local) => local_deterministic_vertices(&SystemLayout::abcd()),
        (ScenarioArg::TwoByTwo, VertexKindArg::Ns) => ns_extremal_vertices_2x2(),
        (ScenarioArg::Abcd, VertexKindArg::Lrns) => lrns_product_vertices(),
        (ScenarioArg::Abcd, VertexKindArg::Ns) => {
            return Err(CliError::Usage(
                "ns vertices are enumerated for the 2222 scenario only".into(),
            ))
        }
        (ScenarioArg::TwoByTwo, VertexKindArg::Lrns) => {
            return Err(CliError::Usage("lrns vertices need the abcd scenario".into()))
        }
    };
    let mut text = String::new();
    for v in &set.vertices {
        text.push_str(&serde_json::to_string(&box_to_json(v)).expect("JSON values serialize"));
        text.push('\n');
    }
    session.emit(args.out.as_deref(), &text)
}

fn parse_partition(s: &str) -> CliResult<Vec<Vec<(usize, usize)>>> {
    serde_json::from_str(s)
        .map_err(|e| CliError::Usage(format!("partition must be a JSON list of outcome-pair lists: {e}")))
}

pub fn transform(session: &mut Session, args: TransformArgs) -> CliResult {
    let b = session.read_box(&args.input)?;
    require_ns(&b, "input box")?;
    let acted = match &args.acted {
        Some(s) => parse_pair(s, "--acted")?,
        None => (0, 1),
    };
    let out = match args.op {
        TransformOp::Twirl => twirl_on(&b, acted)?,
        TransformOp::ORot => {
            let label = args
                .label
                .as_deref()
                .ok_or_else(|| CliError::Usage("o-rot needs --label".into()))?
                .parse()?;
            o_rotation_on(b.layout(), acted, label).apply(&b)?
        }
        TransformOp::Compare => {
            let measure = parse_pair(
                args.measure
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("compare needs --measure".into()))?,
                "--measure",
            )?;
            let partition = parse_partition(
                args.partition
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("compare needs --partition".into()))?,
            )?;
            ComparingOperation::new(measure, partition).apply_tensored(&b, acted)?
        }
    };
    session.emit(args.out.as_deref(), &pretty(&box_to_json(&out)))
}

pub fn verify(session: &mut Session, args: VerifyArgs) -> CliResult {
    let op = standard_family(&args.op)?;
    session.manifest.seed = Some(args.seed);
    let mut options = SuiteOptions::new(args.trials, args.seed);
    options.lp_cases = args.lp_cases;
    let report = run_suite(&op, &options)?;
    session.emit(args.out.as_deref(), &pretty(&report.to_json()))?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.check.to_string())
            .collect();
        Err(CliError::CheckFailed(format!(
            "{} failed: {}",
            args.op,
            failed.join(", ")
        )))
    }
}

fn show(b: &BoxTable) -> String {
    let layout = b.layout();
    let mut text = format!("layout {layout}\n");
    for x in 0..layout.num_inputs() {
        let cells: Vec<String> = b
            .row(x)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != rational::zero())
            .map(|(a, p)| {
                format!(
                    "{:?}: {} ({})",
                    layout.decode_output(a),
                    rational::format(p),
                    decimal(p)
                )
            })
            .collect();
        text.push_str(&format!("x={:?}  {}\n", layout.decode_input(x), cells.join("  ")));
    }
    text
}

/// `pr`, `apr`, `brst:RST`, `iso:RST:ALPHA`, `flag:J:N`, `bin:L1,L2,..[@ALPHA]`.
fn make_family(spec: &str, session: &mut Session) -> CliResult<BoxTable> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let usage = || CliError::Usage(format!("unknown family {spec:?}"));
    Ok(match head {
        "pr" if rest.is_empty() => b_rst(MaxNonlocalLabel::PR),
        "apr" if rest.is_empty() => b_rst(MaxNonlocalLabel::ANTI_PR),
        "brst" => b_rst(rest.parse()?),
        "iso" => {
            let (label, alpha) = rest.split_once(':').ok_or_else(usage)?;
            isotropic(&IsotropicSpec::new(label.parse()?, parse_alpha(alpha, session)?)?)
        }
        "flag" => {
            let (j, n) = rest.split_once(':').ok_or_else(usage)?;
            let j = j.parse().map_err(|_| usage())?;
            let n = n.parse().map_err(|_| usage())?;
            flag_box(j, n)?
        }
        "bin" => {
            let (labels, alpha) = rest.split_once('@').unwrap_or((rest, "1"));
            b_in_maximal_flags(&parse_labels(labels)?, &parse_alpha(alpha, session)?)?
        }
        _ => return Err(usage()),
    })
}

pub fn box_command(session: &mut Session, cmd: BoxCommand) -> CliResult {
    match cmd {
        BoxCommand::Show { input } => {
            let b = session.read_box(&input)?;
            session.emit(None, &show(&b))
        }
        BoxCommand::Validate { input } => {
            let v = session.read_json(&input)?;
            let (layout, entries) = entries_from_json(&v)?;
            let report = validate_entries(&layout, &entries)?;
            if !report.is_ok() {
                return Err(CliError::InvalidBox(format!("{}: {report}", input.display())));
            }
            let b = BoxTable::new(layout, entries)?;
            match is_fully_nonsignaling(&b) {
                (true, _) => session.emit(None, "valid\nfully non-signaling\n"),
                (false, w) => {
                    session.emit(None, "valid\nsignaling\n")?;
                    Err(CliError::CheckFailed(format!(
                        "{}: {}",
                        input.display(),
                        w.map(|w| w.to_string()).unwrap_or_default()
                    )))
                }
            }
        }
        BoxCommand::Make { family, out } => {
            let b = make_family(&family, session)?;
            session.emit(out.as_deref(), &pretty(&box_to_json(&b)))
        }
    }
}
