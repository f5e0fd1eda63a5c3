use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use vdmlab::domain_models::{Cone, Growth, MeasureSpec, ProblemSpec, SetModel, WeightModel};

use crate::args::{Command, MeasureArg, MethodArg, ModeArg, ModelArg, Opts, SetArg};

/// Failure reported as machine-readable JSON. Exit code 2 means the input
/// was rejected before dispatch, 1 that a module failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
    pub pointer: Option<String>,
}

impl CliError {
    pub fn input(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            kind: "invalid-input".into(),
            message: message.into(),
            pointer: Some(pointer.into()),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            exit_code: 1,
            kind: "io".into(),
            message: message.into(),
            pointer: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "pointer": self.pointer,
                "exit_code": self.exit_code,
            }
        })
    }
}

impl From<vdmlab::Error> for CliError {
    fn from(e: vdmlab::Error) -> Self {
        Self {
            exit_code: 1,
            kind: e.kind().into(),
            message: e.to_string(),
            pointer: None,
        }
    }
}

/// Everything a run depends on, with defaults applied. Echoed verbatim in
/// the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub command: Command,
    pub problem: Option<ProblemSpec>,
    pub params: Params,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub d_max: u32,
    pub dim: Option<usize>,
    pub resolution: usize,
    pub fine_factor: usize,
    pub restarts: usize,
    pub samples: usize,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub mode: ModeArg,
    pub method: MethodArg,
    pub phases: Option<usize>,
    pub nodes: Option<usize>,
    pub model: ModelArg,
    pub radius: f64,
    pub radii: Vec<f64>,
    pub grid_radius: Option<f64>,
    pub grid_size: Option<usize>,
    pub t: Option<f64>,
    pub density_exp: Option<Vec<u32>>,
    pub eta: f64,
    pub delta: f64,
    pub moments: u32,
    pub per_node: bool,
    pub list: bool,
}

/// JSON pointer (RFC 6901) for a serde path.
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let part = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => escape(key),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&part);
    }
    out
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// Internally tagged enums buffer their content, so the serde path stops at
/// the enum. Inside it the culprit is the one field whose removal changes
/// the error: type errors surface while fields are visited, missing fields
/// only afterwards.
fn refine(root: &serde_json::Value, pointer: String, msg: &str) -> String {
    let Some(serde_json::Value::Object(obj)) = root.pointer(&pointer) else {
        return pointer;
    };
    if obj.contains_key("kind") && msg.contains("variant") {
        return format!("{pointer}/kind");
    }
    for key in obj.keys().filter(|k| *k != "kind") {
        let mut probe = root.clone();
        if let Some(serde_json::Value::Object(o)) = probe.pointer_mut(&pointer) {
            o.remove(key);
        }
        let changed = match ProblemSpec::deserialize(&probe) {
            Ok(_) => true,
            Err(e) => e.to_string() != msg,
        };
        if changed {
            return format!("{pointer}/{}", escape(key));
        }
    }
    pointer
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::input("", e.to_string()))?;
    let spec: ProblemSpec = serde_path_to_error::deserialize(&value).map_err(|e| {
        let pointer = pointer_of(e.path());
        let msg = e.into_inner().to_string();
        CliError::input(refine(&value, pointer, &msg), msg)
    })?;
    if spec.schema != 1 {
        return Err(CliError::input("/schema", format!("unsupported schema version {}", spec.schema)));
    }
    Ok(spec)
}

fn read_problem(path: &Path) -> Result<ProblemSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError {
        exit_code: 2,
        kind: "invalid-input".into(),
        message: format!("cannot read {}: {e}", path.display()),
        pointer: None,
    })?;
    parse_problem(&text)
}

fn shorthand_set(set: SetArg, dim: Option<usize>, radius: f64, t: Option<f64>) -> SetModel {
    let n = dim.unwrap_or(match set {
        SetArg::Ball | SetArg::Polydisk => 2,
        _ => 1,
    });
    match set {
        SetArg::Interval => SetModel::Interval { a: -1.0, b: 1.0 },
        SetArg::Circle => SetModel::Circle { radius },
        SetArg::Disk => SetModel::ComplexDisk { radius },
        SetArg::Ball => SetModel::ComplexBall { dim: n, radius, shells: 0 },
        SetArg::Polydisk => SetModel::Polydisk {
            dim: n,
            radius,
            torus_only: false,
        },
        SetArg::Torus => SetModel::Torus { radii: vec![radius; n] },
        SetArg::Simplex => SetModel::RealSimplex { dim: n },
        SetArg::Box => SetModel::RealBox {
            lo: vec![-1.0; n],
            hi: vec![1.0; n],
        },
        SetArg::Cone => SetModel::ConeTruncation {
            cone: if n == 1 { Cone::HalfLine } else { Cone::Orthant { dim: n } },
            t: t.unwrap_or(1.0),
        },
    }
}

fn shorthand_measure(m: MeasureArg, set: Option<&SetModel>, nodes: Option<usize>) -> Result<MeasureSpec, CliError> {
    let (a, b) = match set {
        Some(SetModel::Interval { a, b }) => (*a, *b),
        _ => (-1.0, 1.0),
    };
    let radius = match set {
        Some(SetModel::Circle { radius }) | Some(SetModel::ComplexDisk { radius }) => *radius,
        _ => 1.0,
    };
    Ok(match m {
        MeasureArg::Arc => MeasureSpec::Arc { radius, nodes },
        MeasureArg::TorusArc => {
            let radii = match set {
                Some(SetModel::Torus { radii }) => radii.clone(),
                Some(SetModel::Polydisk { dim, radius, .. }) => vec![*radius; *dim],
                Some(SetModel::Circle { radius }) => vec![*radius],
                _ => return Err(CliError::input("/measure", "torus-arc needs a torus, polydisk or circle set")),
            };
            MeasureSpec::TorusArc { radii, nodes }
        }
        MeasureArg::Lebesgue => MeasureSpec::Lebesgue { a, b, nodes },
        MeasureArg::Arcsine => MeasureSpec::Arcsine { a, b, nodes },
        MeasureArg::UniformCircle => MeasureSpec::UniformCircle { radius },
        MeasureArg::UniformInterval => MeasureSpec::UniformInterval { a, b, mass: 1.0 },
    })
}

fn needs_problem(c: Command) -> bool {
    !matches!(c, Command::Basis | Command::Rumely)
}

fn needs_measure(c: Command) -> bool {
    matches!(c, Command::Zd | Command::ZdMc | Command::Ldp | Command::Christoffel)
}

/// Merge the problem file with the shorthand flags, apply defaults and
/// validate. Every failure here exits with code 2.
pub fn build(command: Command, opts: &Opts) -> Result<RunSpec, CliError> {
    let mut problem = match &opts.spec {
        Some(path) => Some(read_problem(path)?),
        None => None,
    };
    let radius = opts.radius.unwrap_or(1.0);
    if let Some(set) = opts.set {
        let model = shorthand_set(set, opts.dim, radius, opts.t);
        match &mut problem {
            Some(p) => p.set = model,
            None => {
                problem = Some(ProblemSpec {
                    schema: 1,
                    set: model,
                    weight: WeightModel::unit(),
                    measure: None,
                })
            }
        }
    }
    let weight_flags = opts.q_scale.is_some() || opts.q_exponent.is_some() || opts.gamma.is_some() || opts.c.is_some();
    if weight_flags || opts.measure.is_some() {
        let Some(p) = problem.as_mut() else {
            return Err(CliError::input("/set", "weight and measure flags need a set (--set or --spec)"));
        };
        if opts.q_scale.is_some() || opts.q_exponent.is_some() {
            let scale = opts.q_scale.unwrap_or(p.weight.scale);
            let exponent = opts.q_exponent.unwrap_or(p.weight.exponent);
            let growth = p.weight.growth;
            p.weight = WeightModel::power(scale, exponent);
            p.weight.growth = growth;
        }
        if opts.gamma.is_some() || opts.c.is_some() {
            let g = p.weight.growth.unwrap_or(Growth {
                c: p.weight.scale,
                gamma: p.weight.exponent,
            });
            p.weight.growth = Some(Growth {
                c: opts.c.unwrap_or(g.c),
                gamma: opts.gamma.unwrap_or(g.gamma),
            });
        }
        if let Some(m) = opts.measure {
            p.measure = Some(shorthand_measure(m, Some(&p.set), opts.nodes)?);
        }
    }

    if needs_problem(command) && problem.is_none() {
        return Err(CliError::input("/set", format!("{} needs a set (--set or --spec)", command.name())));
    }
    if let Some(p) = &problem {
        p.set.validate().map_err(|e| CliError::input("/set", e.to_string()))?;
        p.weight.validate().map_err(|e| CliError::input("/weight", e.to_string()))?;
        if needs_measure(command) && p.measure.is_none() {
            return Err(CliError::input("/measure", format!("{} needs a measure (--measure or \"measure\")", command.name())));
        }
    }
    if command.stochastic() && opts.seed.is_none() {
        return Err(CliError::input("/seed", format!("{} is stochastic and needs --seed", command.name())));
    }
    if opts.threads == Some(0) {
        return Err(CliError::input("/threads", "--threads must be at least 1"));
    }

    let dim = opts.dim.or(problem.as_ref().map(|p| p.set.dim()));
    let one_dim = dim.unwrap_or(1) == 1;
    let params = Params {
        d_max: opts.d_max.unwrap_or(10),
        dim,
        resolution: opts.resolution.unwrap_or(if one_dim { 401 } else { 16 }),
        fine_factor: opts.fine_factor.unwrap_or(4),
        restarts: opts.restarts.unwrap_or(1),
        samples: opts.samples.unwrap_or(10_000),
        seed: opts.seed,
        tol: opts.tol,
        threads: opts.threads,
        mode: opts.mode.unwrap_or(ModeArg::Plain),
        method: opts.method.unwrap_or(MethodArg::Stieltjes),
        phases: opts.phases,
        nodes: opts.nodes,
        model: opts.model.unwrap_or(ModelArg::Ball),
        radius,
        radii: opts.radii.clone().unwrap_or_else(|| vec![1.0, 1.0]),
        grid_radius: opts.grid_radius,
        grid_size: opts.grid_size,
        t: opts.t,
        density_exp: opts.density_exp.clone(),
        eta: opts.eta.unwrap_or(0.5),
        delta: opts.delta.unwrap_or(1.0),
        moments: opts.moments.unwrap_or(4),
        per_node: opts.per_node,
        list: opts.list,
    };
    if params.resolution == 0 {
        return Err(CliError::input("/resolution", "mesh resolution must be at least 1"));
    }
    if let Some(tol) = params.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::input("/tol", "--tol must be positive"));
        }
    }
    Ok(RunSpec {
        command,
        problem,
        params,
        out: opts.out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_names_the_offending_field() {
        let err = parse_problem(r#"{"set": {"kind": "interval", "a": -1, "b": "x"}}"#).unwrap_err();
        assert_eq!(err.exit_code, 2);
        assert_eq!(err.pointer.as_deref(), Some("/set/b"));
        let err = parse_problem(r#"{"set": {"kind": "circle"}, "measure": {"kind": "arc", "nodes": -3}}"#).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/measure/nodes"));
        let err = parse_problem(r#"{"set": {"kind": "circle", "radious": 2}}"#).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/set/radious"));
        let err = parse_problem(r#"{"set": {"kind": "sphere"}}"#).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/set/kind"));
        let err = parse_problem(r#"{"set": {"kind": "interval", "a": 0, "b": 1}, "weight": {"scale": "big"}}"#).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/weight/scale"));
    }

    #[test]
    fn malformed_json_is_an_input_error() {
        let err = parse_problem("{\"set\": ").unwrap_err();
        assert_eq!(err.exit_code, 2);
        let err = parse_problem(r#"{"schema": 2, "set": {"kind": "circle"}}"#).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/schema"));
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        let opts = Opts {
            set: Some(SetArg::Interval),
            ..Opts::default()
        };
        let err = build(Command::Diameter, &opts).unwrap_err();
        assert_eq!(err.pointer.as_deref(), Some("/seed"));
        let opts = Opts { seed: Some(1), ..opts };
        assert!(build(Command::Diameter, &opts).is_ok());
    }

    #[test]
    fn shorthand_measure_follows_the_set() {
        let opts = Opts {
            set: Some(SetArg::Circle),
            radius: Some(2.0),
            measure: Some(MeasureArg::Arc),
            ..Opts::default()
        };
        let spec = build(Command::Zd, &opts).unwrap();
        let p = spec.problem.unwrap();
        assert_eq!(p.measure, Some(MeasureSpec::Arc { radius: 2.0, nodes: None }));
    }
}
