//! Scenario files: a JSON description of a detector sequence and the
//! quantities to compute from it.
//!
//! Matrices are nested row lists whose entries are either a real number or a
//! `[re, im]` pair. Outcome ids are strings.

use std::collections::BTreeMap;
use std::path::Path;

use qinstrument::sequence::{Insertion, InterdictiveState};
use qinstrument::{
    ConditioningMode, HamiltonianSpec, Instrument, KrausSet, LabelFunction, MeasurementSequence,
    Operator, Outcome, PhotodetectorSpec, Stage, Tolerances, Triple, UnitaryChannel, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(&self) -> C64 {
        match *self {
            Entry::Real(re) => C64::new(re, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }

    fn from_c64(z: C64) -> Self {
        Entry::Complex([z.re, z.im])
    }
}

pub type MatrixDecl = Vec<Vec<Entry>>;
pub type KetDecl = Vec<Entry>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub dim: usize,
    pub stages: Vec<StageDecl>,
    /// One optional label map per stage (channel stages take `null`);
    /// missing maps default to unit labels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<Option<BTreeMap<String, f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ConditioningDecl>,
    /// Fall back to the full Bayes ratio when a simplified conditioning
    /// formula is refused for incompleteness.
    #[serde(default = "default_true")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub insertions: Vec<InsertionDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakDecl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StageDecl {
    Instrument {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        outcomes: Vec<OutcomeDecl>,
    },
    Projective {
        basis: Vec<KetDecl>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ids: Option<Vec<String>>,
    },
    Photodetector {
        #[serde(rename = "N")]
        saturation: usize,
        #[serde(rename = "D")]
        cutoff: usize,
        #[serde(default = "default_one")]
        omega: f64,
        #[serde(default = "default_one")]
        hbar: f64,
    },
    Unitary {
        u: MatrixDecl,
    },
    Hamiltonian {
        h: MatrixDecl,
        t: f64,
        #[serde(default = "default_one")]
        hbar: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDecl {
    pub id: String,
    pub kraus: Vec<MatrixDecl>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionOn {
    First,
    Last,
    Intermediate,
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDecl {
    #[default]
    Simplified,
    FullRatio,
}

/// Which detector outcome(s) to condition on. The instrument stages are
/// grouped into three detectors `A`, `B`, `C`: `split = [m, n]` puts the
/// first `m` instrument stages in `A`, the next `n` in `B` and the rest in
/// `C`. Outcome ids of composed groups join the member ids with `,`; an
/// empty group is the identity with outcome `"1"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningDecl {
    pub on: ConditionOn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<[usize; 2]>,
    #[serde(default)]
    pub mode: ModeDecl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDecl {
    pub pre: MatrixDecl,
    pub post: MatrixDecl,
}

/// Normalized operation `sum K O K^dagger / norm` inserted after `position`
/// stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionDecl {
    pub position: usize,
    pub kraus: Vec<MatrixDecl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakDecl {
    pub observable: MatrixDecl,
    pub pre: MatrixDecl,
    pub post: MatrixDecl,
    #[serde(default)]
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Normalization,
    Joint,
    Correlation,
    Conditional,
    States,
    Biased,
    Weak,
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

/// Resolved conditioning directive.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioning {
    pub on: ConditionOn,
    pub a: Option<String>,
    pub b: Option<String>,
    pub c: Option<String>,
    pub triple: Triple,
    /// Instrument stages in `A` and in `B`.
    pub split: [usize; 2],
    pub mode: ConditioningMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weak {
    pub observable: Operator,
    pub pre: Operator,
    pub post: Operator,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedStage {
    pub stage: Stage,
    pub photodetector: Option<PhotodetectorSpec>,
}

/// A validated scenario ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dim: usize,
    pub stages: Vec<ResolvedStage>,
    pub sequence: MeasurementSequence,
    /// One label function per instrument stage.
    pub labels: Vec<LabelFunction>,
    pub conditioning: Option<Conditioning>,
    pub fallback: bool,
    pub boundary: Option<(Operator, Operator)>,
    pub insertions: Vec<Insertion>,
    pub outputs: Vec<OutputKind>,
    pub weak: Option<Weak>,
    source: ScenarioFile,
}

/// Reads and validates a scenario file.
pub fn parse(path: &Path, tol: &Tolerances) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text, tol)
}

pub fn parse_str(text: &str, tol: &Tolerances) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, e.into_inner().to_string())
    })?;
    Scenario::resolve(file, tol)
}

fn matrix(decl: &MatrixDecl, dim: usize, path: &str) -> Result<Operator, CliError> {
    if decl.len() != dim || decl.iter().any(|r| r.len() != dim) {
        let shape = decl.iter().map(Vec::len).collect::<Vec<_>>();
        return Err(CliError::schema(
            path,
            format!("expected a {dim}x{dim} matrix, got rows of lengths {shape:?}"),
        ));
    }
    let rows: Vec<Vec<C64>> = decl.iter().map(|r| r.iter().map(Entry::value).collect()).collect();
    Operator::from_rows(&rows).map_err(|e| CliError::at(path, e))
}

fn ket(decl: &KetDecl, dim: usize, path: &str) -> Result<Vec<C64>, CliError> {
    if decl.len() != dim {
        return Err(CliError::schema(path, format!("expected {dim} components, got {}", decl.len())));
    }
    Ok(decl.iter().map(Entry::value).collect())
}

fn kraus_set(decls: &[MatrixDecl], dim: usize, path: &str) -> Result<KrausSet, CliError> {
    let ops = decls
        .iter()
        .enumerate()
        .map(|(i, m)| matrix(m, dim, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    KrausSet::new(ops).map_err(|e| CliError::at(path, e))
}

fn matrix_decl(o: &Operator) -> MatrixDecl {
    (0..o.dim())
        .map(|i| (0..o.dim()).map(|j| Entry::from_c64(o.get(i, j))).collect())
        .collect()
}

fn boundary_state(decl: &MatrixDecl, dim: usize, path: &str, tol: &Tolerances) -> Result<Operator, CliError> {
    let op = matrix(decl, dim, path)?;
    if !op.is_hermitian(tol) {
        return Err(CliError::schema(path, "boundary state must be Hermitian"));
    }
    if !op.is_positive_semidefinite(tol).map_err(|e| CliError::at(path, e))? {
        return Err(CliError::schema(path, "boundary state must be positive semidefinite"));
    }
    Ok(op)
}

impl StageDecl {
    fn resolve(&self, dim: usize, path: &str, tol: &Tolerances) -> Result<ResolvedStage, CliError> {
        let plain = |stage: Stage| ResolvedStage {
            stage,
            photodetector: None,
        };
        match self {
            StageDecl::Instrument { dim: d, outcomes } => {
                if let Some(d) = d {
                    if *d != dim {
                        return Err(CliError::schema(
                            format!("{path}.instrument.dim"),
                            format!("stage dimension {d} differs from scenario dimension {dim}"),
                        ));
                    }
                }
                let outs = outcomes
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        let p = format!("{path}.instrument.outcomes[{i}].kraus");
                        Ok(Outcome::new(o.id.clone(), kraus_set(&o.kraus, dim, &p)?))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                // normalization is an invariant checked by `run` and `verify`
                let inst = Instrument::new_unchecked(dim, outs).map_err(|e| CliError::at(format!("{path}.instrument"), e))?;
                Ok(plain(Stage::Instrument(inst)))
            }
            StageDecl::Projective { basis, ids } => {
                let kets = basis
                    .iter()
                    .enumerate()
                    .map(|(i, k)| ket(k, dim, &format!("{path}.projective.basis[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let p = format!("{path}.projective");
                let inst = Instrument::projective(&kets, tol).map_err(|e| CliError::at(&p, e))?;
                let inst = match ids {
                    None => inst,
                    Some(ids) => {
                        if ids.len() != inst.len() {
                            return Err(CliError::schema(
                                format!("{p}.ids"),
                                format!("{} ids for {} basis vectors", ids.len(), inst.len()),
                            ));
                        }
                        let outs = inst
                            .outcomes()
                            .iter()
                            .zip(ids)
                            .map(|(o, id)| Outcome::new(id.clone(), o.kraus().clone()))
                            .collect();
                        Instrument::new(dim, outs).map_err(|e| CliError::at(format!("{p}.ids"), e))?
                    }
                };
                Ok(plain(Stage::Instrument(inst)))
            }
            StageDecl::Photodetector {
                saturation,
                cutoff,
                omega,
                hbar,
            } => {
                let p = format!("{path}.photodetector");
                let spec = PhotodetectorSpec::new(*saturation, *cutoff, *omega, *hbar).map_err(|e| CliError::at(&p, e))?;
                if *cutoff != dim {
                    return Err(CliError::schema(
                        format!("{p}.D"),
                        format!("cutoff {cutoff} differs from scenario dimension {dim}"),
                    ));
                }
                Ok(ResolvedStage {
                    stage: Stage::Instrument(spec.build()),
                    photodetector: Some(spec),
                })
            }
            StageDecl::Unitary { u } => {
                let p = format!("{path}.unitary.u");
                let ch = UnitaryChannel::new(matrix(u, dim, &p)?, tol).map_err(|e| CliError::at(&p, e))?;
                Ok(plain(Stage::Channel(ch)))
            }
            StageDecl::Hamiltonian { h, t, hbar } => {
                let p = format!("{path}.hamiltonian");
                let spec = HamiltonianSpec::new(matrix(h, dim, &format!("{p}.h"))?, *hbar, tol)
                    .map_err(|e| CliError::at(&p, e))?;
                let ch = spec.propagator(*t, tol).map_err(|e| CliError::at(&p, e))?;
                Ok(plain(Stage::Channel(ch)))
            }
        }
    }
}

impl Scenario {
    pub fn resolve(file: ScenarioFile, tol: &Tolerances) -> Result<Self, CliError> {
        if file.version != FORMAT_VERSION {
            return Err(CliError::schema(
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", file.version),
            ));
        }
        let dim = file.dim;
        if dim == 0 {
            return Err(CliError::schema("dim", "dimension must be at least 1"));
        }
        if file.stages.is_empty() {
            return Err(CliError::schema("stages", "at least one stage is required"));
        }
        let stages = file
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| s.resolve(dim, &format!("stages[{i}]"), tol))
            .collect::<Result<Vec<_>, _>>()?;
        let sequence = MeasurementSequence::new(stages.iter().map(|s| s.stage.clone()).collect())
            .map_err(|e| CliError::at("stages", e))?;
        let labels = resolve_labels(&file, &stages)?;
        let conditioning = file
            .conditioning
            .as_ref()
            .map(|c| resolve_conditioning(c, &sequence))
            .transpose()?;
        let boundary = file
            .boundary
            .as_ref()
            .map(|b| {
                Ok::<_, CliError>((
                    boundary_state(&b.pre, dim, "boundary.pre", tol)?,
                    boundary_state(&b.post, dim, "boundary.post", tol)?,
                ))
            })
            .transpose()?;
        let insertions = file
            .insertions
            .iter()
            .enumerate()
            .map(|(i, ins)| {
                let p = format!("insertions[{i}]");
                if ins.position > stages.len() {
                    return Err(CliError::schema(
                        format!("{p}.position"),
                        format!("position {} beyond {} stages", ins.position, stages.len()),
                    ));
                }
                let ks = kraus_set(&ins.kraus, dim, &format!("{p}.kraus"))?;
                let state = InterdictiveState::from_kraus(ks, tol).map_err(|e| CliError::at(&p, e))?;
                Ok(Insertion {
                    position: ins.position,
                    state,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let weak = file
            .weak
            .as_ref()
            .map(|w| {
                if let Some(bad) = w.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                    return Err(CliError::schema("weak.eps", format!("strengths must be positive, got {bad}")));
                }
                let observable = matrix(&w.observable, dim, "weak.observable")?;
                if !observable.is_hermitian(tol) {
                    return Err(CliError::schema("weak.observable", "observable must be Hermitian"));
                }
                Ok(Weak {
                    observable,
                    pre: boundary_state(&w.pre, dim, "weak.pre", tol)?,
                    post: boundary_state(&w.post, dim, "weak.post", tol)?,
                    eps: w.eps.clone(),
                })
            })
            .transpose()?;
        let mut outputs = file.outputs.clone();
        if outputs.is_empty() {
            outputs = vec![OutputKind::Normalization, OutputKind::Joint];
        }
        for (i, o) in outputs.iter().enumerate() {
            let missing = match o {
                OutputKind::Conditional | OutputKind::States if conditioning.is_none() => Some("conditioning"),
                OutputKind::Weak if weak.is_none() => Some("weak"),
                _ => None,
            };
            if let Some(field) = missing {
                return Err(CliError::schema(format!("outputs[{i}]"), format!("requires a `{field}` block")));
            }
        }
        Ok(Scenario {
            dim,
            stages,
            sequence,
            labels,
            conditioning,
            fallback: file.fallback,
            boundary,
            insertions,
            outputs,
            weak,
            source: file,
        })
    }

    /// The scenario with every stage written out explicitly: instruments as
    /// Kraus lists and channels as unitaries.
    pub fn to_file(&self) -> ScenarioFile {
        let stages = self
            .stages
            .iter()
            .map(|s| match &s.stage {
                Stage::Instrument(inst) => StageDecl::Instrument {
                    dim: Some(inst.dim()),
                    outcomes: inst
                        .outcomes()
                        .iter()
                        .map(|o| OutcomeDecl {
                            id: o.id().to_string(),
                            kraus: o.kraus().operators().iter().map(matrix_decl).collect(),
                        })
                        .collect(),
                },
                Stage::Channel(ch) => StageDecl::Unitary {
                    u: matrix_decl(ch.unitary()),
                },
            })
            .collect();
        ScenarioFile {
            stages,
            ..self.source.clone()
        }
    }

    pub fn has_photodetector(&self) -> bool {
        self.stages.iter().any(|s| s.photodetector.is_some())
    }
}

fn resolve_labels(file: &ScenarioFile, stages: &[ResolvedStage]) -> Result<Vec<LabelFunction>, CliError> {
    if !file.labels.is_empty() && file.labels.len() != stages.len() {
        return Err(CliError::schema(
            "labels",
            format!("{} label entries for {} stages", file.labels.len(), stages.len()),
        ));
    }
    let mut out = Vec::new();
    for (i, s) in stages.iter().enumerate() {
        let decl = file.labels.get(i).and_then(Option::as_ref);
        match (&s.stage, decl) {
            (Stage::Channel(_), Some(_)) => {
                return Err(CliError::schema(format!("labels[{i}]"), "channel stages carry no labels"));
            }
            (Stage::Channel(_), None) => {}
            (Stage::Instrument(inst), None) => out.push(LabelFunction::ones(inst)),
            (Stage::Instrument(inst), Some(map)) => {
                let p = format!("labels[{i}]");
                let f = LabelFunction::from_pairs(map.iter().map(|(k, v)| (k.clone(), *v)))
                    .map_err(|e| CliError::at(&p, e))?;
                f.check_covers(inst).map_err(|e| CliError::at(&p, e))?;
                out.push(f);
            }
        }
    }
    Ok(out)
}

fn resolve_conditioning(c: &ConditioningDecl, seq: &MeasurementSequence) -> Result<Conditioning, CliError> {
    let k = seq.instrument_count();
    let [first, middle] = c.split.unwrap_or(if k >= 3 { [1, k - 2] } else { [k.min(1), 0] });
    let triple = Triple::group(seq, first, middle).map_err(|e| CliError::at("conditioning.split", e))?;
    let required: Vec<(&str, &Option<String>, &Instrument)> = match c.on {
        ConditionOn::First => vec![("a", &c.a, &triple.a)],
        ConditionOn::Last => vec![("c", &c.c, &triple.c)],
        ConditionOn::Intermediate => vec![("b", &c.b, &triple.b)],
        ConditionOn::Both => vec![("a", &c.a, &triple.a), ("c", &c.c, &triple.c)],
    };
    for (field, id, inst) in required {
        let path = format!("conditioning.{field}");
        let id = id.as_ref().ok_or_else(|| CliError::schema(&path, "outcome id required"))?;
        if inst.position(id).is_none() {
            let known: Vec<&str> = inst.ids().collect();
            return Err(CliError::schema(path, format!("unknown outcome id {id:?}; known ids {known:?}")));
        }
    }
    Ok(Conditioning {
        on: c.on,
        a: c.a.clone(),
        b: c.b.clone(),
        c: c.c.clone(),
        triple,
        split: [first, middle],
        mode: match c.mode {
            ModeDecl::Simplified => ConditioningMode::Simplified,
            ModeDecl::FullRatio => ConditioningMode::FullRatio,
        },
    })
}
