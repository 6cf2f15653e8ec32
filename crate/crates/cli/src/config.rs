//! Run configuration: a TOML file with one table per block.
//!
//! Every section struct rejects unknown keys. Omitted optional keys take
//! the values of the section's `Default`, so a parsed [`RunConfig`] is fully
//! resolved and can be echoed back as TOML.

use serde::{Deserialize, Serialize};
use thinfem::combgeom::{CombSpec, Rect};
use thinfem::experiments::{epsilon_preset, Source, StudyParams};
use thinfem::{MeshParams, ProfileSpec, ScalarFunction1D, Waveform};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DomainType {
    #[default]
    Graph,
    Comb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformName {
    Sine,
    Cosine,
    Square,
    Sawtooth,
    Triangle,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineSpec {
    pub amplitude: f64,
    pub waves: f64,
}

/// A function of one variable: a constant, polynomial coefficients
/// `[c0, c1, ...]`, `{ poly = [...] }`, `{ table = [[x, v], ...] }` or, for
/// sources and traces only, `{ cosine = { amplitude, waves } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Constant(f64),
    Coefficients(Vec<f64>),
    Poly { poly: Vec<f64> },
    Table { table: Vec<(f64, f64)> },
    Cosine { cosine: CosineSpec },
}

impl FunctionSpec {
    fn scalar(&self, key: &str) -> Result<ScalarFunction1D, ConfigError> {
        let r = match self {
            FunctionSpec::Constant(c) => Ok(ScalarFunction1D::constant(*c)),
            FunctionSpec::Coefficients(c) | FunctionSpec::Poly { poly: c } => ScalarFunction1D::poly(c.clone()),
            FunctionSpec::Table { table } => ScalarFunction1D::table(table.clone()),
            FunctionSpec::Cosine { .. } => {
                return err(format!("{key}: cosine form is only valid for source.f and cell.trace"))
            }
        };
        r.map_err(|e| ConfigError(format!("{key}: {e}")))
    }

    fn source(&self, key: &str) -> Result<Source, ConfigError> {
        Ok(match self {
            FunctionSpec::Constant(c) => Source::Constant(*c),
            FunctionSpec::Cosine { cosine } => Source::Cosine {
                amplitude: cosine.amplitude,
                waves: cosine.waves,
            },
            other => Source::Function(other.scalar(key)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default, rename = "type")]
    pub kind: DomainType,
    pub alpha: f64,
    pub b: FunctionSpec,
    // graph keys
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amp: Option<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<FunctionSpec>,
    // comb keys
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Rectangles `[x_lo, x_hi, y_lo, y_hi]` of the reference cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    /// Right-hand side `f(x1)`.
    pub f: FunctionSpec,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            f: FunctionSpec::Constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub cells_per_period: usize,
    pub ny: usize,
    /// Comb mesh spacing, reference-cell units.
    pub h: f64,
    /// Reference-cell spacing for the eigenvalue.
    pub cell_h: f64,
    pub triangle_cap: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        let m = MeshParams::default();
        let s = StudyParams::default();
        MeshSection {
            cells_per_period: m.cells_per_period,
            ny: m.ny,
            h: s.comb_h,
            cell_h: s.cell_h,
            triangle_cap: m.triangle_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub limit_nodes: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = StudyParams::default();
        SolverSection {
            tol: s.tol,
            max_iter: s.max_iter,
            limit_nodes: s.limit_nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Explicit ladder; filled from `preset` when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    pub preset: String,
    /// Single epsilon for `solve2d` and the `cell` decay profile.
    pub epsilon: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            epsilons: None,
            preset: "standard".into(),
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    pub modes: usize,
    /// Trace on the cell base in cell coordinates `s = x / eps^alpha` in `[-1, 1]`.
    pub trace: FunctionSpec,
    /// Number of `y` samples in `[0, 1]` for the decay profile.
    pub samples: usize,
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection {
            modes: thinfem::cell::DEFAULT_MODES,
            trace: FunctionSpec::Cosine {
                cosine: CosineSpec {
                    amplitude: 1.0,
                    waves: 1.0,
                },
            },
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Validated geometry of the run.
#[derive(Debug, Clone)]
pub enum Domain {
    Graph(ProfileSpec),
    Comb(CombSpec),
}

impl Domain {
    pub fn alpha(&self) -> f64 {
        match self {
            Domain::Graph(s) => s.alpha(),
            Domain::Comb(s) => s.alpha(),
        }
    }
}

const GRAPH_KEYS: [&str; 6] = ["waveform", "values", "phase", "base", "amp", "period"];
const COMB_KEYS: [&str; 3] = ["width", "height", "cell"];

impl DomainSection {
    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("waveform", self.waveform.is_some()),
            ("values", self.values.is_some()),
            ("phase", self.phase.is_some()),
            ("base", self.base.is_some()),
            ("amp", self.amp.is_some()),
            ("period", self.period.is_some()),
            ("width", self.width.is_some()),
            ("height", self.height.is_some()),
            ("cell", self.cell.is_some()),
        ];
        flags.iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    fn build(&self) -> Result<Domain, ConfigError> {
        if !(self.alpha > 1.0) {
            return err("domain.alpha must be > 1");
        }
        let (foreign, name): (&[&str], &str) = match self.kind {
            DomainType::Graph => (&COMB_KEYS, "graph"),
            DomainType::Comb => (&GRAPH_KEYS, "comb"),
        };
        if let Some(k) = self.present().into_iter().find(|k| foreign.contains(k)) {
            return err(format!("domain.{k} is not a key of domain type {name}"));
        }
        let b = self.b.scalar("domain.b")?;
        let wrap = |e: thinfem::Error| ConfigError(format!("domain: {e}"));
        match self.kind {
            DomainType::Graph => {
                let need = |v: &Option<FunctionSpec>, k: &str| {
                    v.clone()
                        .ok_or_else(|| ConfigError(format!("domain.{k} is required for domain type graph")))
                };
                let waveform = match (self.waveform, &self.values) {
                    (None, _) => return err("domain.waveform is required for domain type graph"),
                    (Some(WaveformName::Tabulated), Some(v)) => Waveform::tabulated(v.clone()).map_err(wrap)?,
                    (Some(WaveformName::Tabulated), None) => {
                        return err("domain.values is required for waveform tabulated")
                    }
                    (Some(_), Some(_)) => return err("domain.values is only valid for waveform tabulated"),
                    (Some(WaveformName::Sine), None) => Waveform::Sine,
                    (Some(WaveformName::Cosine), None) => Waveform::Cosine,
                    (Some(WaveformName::Square), None) => Waveform::Square,
                    (Some(WaveformName::Sawtooth), None) => Waveform::Sawtooth,
                    (Some(WaveformName::Triangle), None) => Waveform::Triangle,
                };
                let spec = ProfileSpec::new(
                    b,
                    waveform,
                    need(&self.base, "base")?.scalar("domain.base")?,
                    need(&self.amp, "amp")?.scalar("domain.amp")?,
                    need(&self.period, "period")?.scalar("domain.period")?,
                    self.alpha,
                )
                .map_err(wrap)?;
                Ok(Domain::Graph(spec.with_phase(self.phase.unwrap_or(0.0))))
            }
            DomainType::Comb => {
                let (Some(width), Some(height), Some(cell)) = (self.width, self.height, &self.cell) else {
                    return err("domain.width, domain.height and domain.cell are required for domain type comb");
                };
                let rects = cell.iter().map(|r| Rect::new(r[0], r[1], r[2], r[3])).collect();
                Ok(Domain::Comb(
                    CombSpec::new(b, width, height, rects, self.alpha).map_err(wrap)?,
                ))
            }
        }
    }
}

/// Everything a command needs, checked before any computation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub domain: Domain,
    pub source: Source,
    pub trace: Source,
    pub ladder: Vec<f64>,
    pub params: StudyParams,
}

fn positive(v: f64, key: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        err(format!("{key} must be > 0"))
    }
}

pub fn parse_config(text: &str) -> Result<Resolved, ConfigError> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| ConfigError(one_line(&e.to_string())))?;
    let domain = config.domain.build()?;
    let source = config.source.f.source("source.f")?;
    let trace = config.cell.trace.source("cell.trace")?;

    let m = &config.mesh;
    if m.cells_per_period == 0 || m.ny == 0 {
        return err("mesh.cells_per_period and mesh.ny must be >= 1");
    }
    positive(m.h, "mesh.h")?;
    positive(m.cell_h, "mesh.cell_h")?;
    if m.triangle_cap == 0 {
        return err("mesh.triangle_cap must be >= 1");
    }
    positive(config.solver.tol, "solver.tol")?;
    if config.solver.max_iter == 0 {
        return err("solver.max_iter must be >= 1");
    }
    if config.solver.limit_nodes < 3 {
        return err("solver.limit_nodes must be >= 3");
    }
    if config.cell.modes == 0 {
        return err("cell.modes must be >= 1");
    }
    if config.cell.samples < 2 {
        return err("cell.samples must be >= 2");
    }

    let study = &mut config.study;
    if study.preset != "standard" {
        return err(format!("study.preset must be \"standard\", got \"{}\"", study.preset));
    }
    let ladder = study
        .epsilons
        .get_or_insert_with(|| epsilon_preset(domain.alpha()))
        .clone();
    if ladder.is_empty() {
        return err("study.epsilons must not be empty");
    }
    if ladder.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return err("study.epsilons must lie in (0, 1)");
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return err("study.epsilons must be strictly decreasing");
    }
    if !(study.epsilon > 0.0 && study.epsilon < 1.0) {
        return err("study.epsilon must lie in (0, 1)");
    }

    let params = StudyParams {
        mesh: MeshParams {
            cells_per_period: m.cells_per_period,
            ny: m.ny,
            triangle_cap: m.triangle_cap,
        },
        comb_h: m.h,
        cell_h: m.cell_h,
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        limit_nodes: config.solver.limit_nodes,
    };
    Ok(Resolved {
        config,
        domain,
        source,
        trace,
        ladder,
        params,
    })
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl RunConfig {
    /// The resolved configuration as TOML, for the run log.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# could not serialize configuration: {e}\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[domain]\nwaveform = \"sine\"\nbase = [1]\namp = [1]\nperiod = [1]\nalpha = 1.5\nb = [1]\n";

    #[test]
    fn minimal_graph_config_gets_defaults() {
        let r = parse_config(MINIMAL).unwrap();
        assert!(matches!(r.domain, Domain::Graph(_)));
        assert_eq!(r.ladder, vec![0.2, 0.1, 0.05]);
        assert_eq!(r.params, StudyParams::default());
        assert_eq!(r.source, Source::Constant(1.0));
        let echoed = r.config.echo();
        assert!(echoed.contains("epsilons = [0.2, 0.1, 0.05]"), "{echoed}");
        assert_eq!(parse_config(&echoed).unwrap().config, r.config);
    }

    #[test]
    fn alpha_must_exceed_one() {
        let e = parse_config(&MINIMAL.replace("alpha = 1.5", "alpha = 0.5")).unwrap_err();
        assert!(e.0.contains("alpha must be > 1"), "{e}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config(&format!("{MINIMAL}[study]\nepsilonn = [0.1]\n")).unwrap_err();
        assert!(e.0.contains("epsilonn"), "{e}");
        let e = parse_config(&format!("{MINIMAL}[sovler]\ntol = 1e-8\n")).unwrap_err();
        assert!(e.0.contains("sovler"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_a_line_number() {
        let e = parse_config("[domain]\nalpha = = 2\n").unwrap_err();
        assert!(e.0.contains("line 2"), "{e}");
        assert!(!e.0.contains('\n'));
    }

    #[test]
    fn keys_of_the_other_domain_type_are_rejected() {
        let e = parse_config(&format!("{MINIMAL}width = 1.0\n")).unwrap_err();
        assert!(e.0.contains("domain.width"), "{e}");
    }

    #[test]
    fn comb_and_function_forms() {
        let text = "[domain]\ntype = \"comb\"\nalpha = 2.0\nb = { table = [[0.0, 1.0], [1.0, 2.0]] }\nwidth = 1.0\nheight = 1.0\ncell = [[0.25, 0.75, 0.0, 1.0]]\n\n[source]\nf = { cosine = { amplitude = 2.0, waves = 1.0 } }\n";
        let r = parse_config(text).unwrap();
        assert!(matches!(r.domain, Domain::Comb(_)));
        assert_eq!(r.ladder, vec![0.2, 0.1]);
        assert_eq!(
            r.source,
            Source::Cosine {
                amplitude: 2.0,
                waves: 1.0
            }
        );
        let e =
            parse_config(&text.replace("b = {", "b = { cosine = { amplitude = 1.0, waves = 1.0 } }\n#")).unwrap_err();
        assert!(e.0.contains("domain.b"), "{e}");
    }

    #[test]
    fn ladder_is_validated() {
        let e = parse_config(&format!("{MINIMAL}[study]\nepsilons = [0.1, 0.2]\n")).unwrap_err();
        assert!(e.0.contains("strictly decreasing"), "{e}");
    }
}
