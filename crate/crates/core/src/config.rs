//! Flat key-value run configuration.
//!
//! Grammar: one `key = value` pair per line, `#` starts a comment, blank
//! lines are ignored, dotted keys express nesting. Unknown keys are
//! rejected so that typos fail loudly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::analysis::{SamplingKind, StudyConfig, TimeStepLaw};
use crate::anisotropy::AnisotropyModel;
use crate::error::{Error, Result};
use crate::geometry::SimplicialSurface;
use crate::solver::SolverConfig;

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        if key.is_empty() || val.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key or value", lineno + 1)));
        }
        if map.insert(key.clone(), val).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnisotropySpec {
    Isotropic,
    Elliptic { a1: f64, a2: f64 },
    RegL1 { eps: f64 },
    RegLInf { eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// Sample of the rescaled dual unit ball, uniform in normal angle.
    Wulff { radius: f64, vertices: usize },
    /// Sample of the rescaled dual unit ball, uniform in arc length.
    WulffArclength { radius: f64, vertices: usize },
    /// Mesh file path.
    MeshFile(String),
}

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub n_min: u32,
    pub n_max: u32,
    pub time: f64,
    pub h0_constant: Option<f64>,
    pub sampling: SamplingKind,
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub anisotropy: AnisotropySpec,
    pub initial: InitialSpec,
    pub tau: TimeStepLaw,
    pub tau_tilde: TimeStepLaw,
    pub lambda: f64,
    pub steps: usize,
    pub snapshots: Vec<usize>,
    pub exact_r0: Option<f64>,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub theta0: f64,
    pub seed: u64,
    pub study: Option<StudySpec>,
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("key `{key}`: not a number: `{v}`"))),
    }
}

fn need_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    get_f64(map, key)?.ok_or_else(|| Error::InvalidConfig(format!("missing key `{key}`")))
}

fn get_usize(map: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("key `{key}`: not an integer: `{v}`"))),
    }
}

fn parse_law(map: &BTreeMap<String, String>, prefix: &str) -> Result<TimeStepLaw> {
    let law = map
        .get(&format!("{prefix}.law"))
        .map(String::as_str)
        .unwrap_or("absolute");
    let value = need_f64(map, &format!("{prefix}.value"))?;
    if !(value > 0.0) {
        return Err(Error::InvalidConfig(format!("`{prefix}.value` must be positive")));
    }
    match law {
        "absolute" => Ok(TimeStepLaw::Absolute(value)),
        "h0" => Ok(TimeStepLaw::ProportionalH0(value)),
        "h0sq" => Ok(TimeStepLaw::ProportionalH0Sq(value)),
        other => Err(Error::InvalidConfig(format!("`{prefix}.law`: unknown law `{other}`"))),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "anisotropy.kind",
    "anisotropy.a1",
    "anisotropy.a2",
    "anisotropy.eps",
    "initial.kind",
    "initial.radius",
    "initial.vertices",
    "initial.path",
    "tau.law",
    "tau.value",
    "tautilde.law",
    "tautilde.value",
    "lambda",
    "steps",
    "snapshots",
    "exact.r0",
    "solver.newton_tol",
    "solver.max_iter",
    "solver.theta0",
    "seed",
    "study.n_min",
    "study.n_max",
    "study.time",
    "study.h0_constant",
    "study.sampling",
];

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&parse_kv(text)?)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
            }
        }
        let anisotropy = match map
            .get("anisotropy.kind")
            .ok_or_else(|| Error::InvalidConfig("missing key `anisotropy.kind`".into()))?
            .as_str()
        {
            "isotropic" => AnisotropySpec::Isotropic,
            "elliptic" => AnisotropySpec::Elliptic {
                a1: need_f64(map, "anisotropy.a1")?,
                a2: need_f64(map, "anisotropy.a2")?,
            },
            "regl1" => AnisotropySpec::RegL1 { eps: need_f64(map, "anisotropy.eps")? },
            "reglinf" => AnisotropySpec::RegLInf { eps: need_f64(map, "anisotropy.eps")? },
            other => return Err(Error::InvalidConfig(format!("unknown anisotropy kind `{other}`"))),
        };
        let initial = match map.get("initial.kind").map(String::as_str).unwrap_or("wulff") {
            "wulff" => InitialSpec::Wulff {
                radius: get_f64(map, "initial.radius")?.unwrap_or(1.0),
                vertices: get_usize(map, "initial.vertices")?
                    .ok_or_else(|| Error::InvalidConfig("missing key `initial.vertices`".into()))?,
            },
            "wulff-arclength" => InitialSpec::WulffArclength {
                radius: get_f64(map, "initial.radius")?.unwrap_or(1.0),
                vertices: get_usize(map, "initial.vertices")?
                    .ok_or_else(|| Error::InvalidConfig("missing key `initial.vertices`".into()))?,
            },
            "mesh" => InitialSpec::MeshFile(
                map.get("initial.path")
                    .ok_or_else(|| Error::InvalidConfig("missing key `initial.path`".into()))?
                    .clone(),
            ),
            other => return Err(Error::InvalidConfig(format!("unknown initial kind `{other}`"))),
        };
        let steps = get_usize(map, "steps")?.unwrap_or(0);
        let snapshots: Vec<usize> = match map.get("snapshots") {
            None => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidConfig(format!("bad snapshot index `{t}`")))
                })
                .collect::<Result<_>>()?,
        };
        if let Some(&bad) = snapshots.iter().find(|&&s| s > steps) {
            return Err(Error::InvalidConfig(format!(
                "snapshot index {bad} exceeds step count {steps}"
            )));
        }
        let study = if map.keys().any(|k| k.starts_with("study.")) {
            let sampling = match map.get("study.sampling").map(String::as_str).unwrap_or("gauss") {
                "gauss" => SamplingKind::GaussMap,
                "arclength" => SamplingKind::ArcLength,
                other => return Err(Error::InvalidConfig(format!("unknown sampling `{other}`"))),
            };
            Some(StudySpec {
                n_min: get_usize(map, "study.n_min")?
                    .ok_or_else(|| Error::InvalidConfig("missing key `study.n_min`".into()))? as u32,
                n_max: get_usize(map, "study.n_max")?
                    .ok_or_else(|| Error::InvalidConfig("missing key `study.n_max`".into()))? as u32,
                time: need_f64(map, "study.time")?,
                h0_constant: get_f64(map, "study.h0_constant")?,
                sampling,
            })
        } else {
            None
        };
        Ok(RunConfig {
            anisotropy,
            initial,
            tau: parse_law(map, "tau")?,
            tau_tilde: parse_law(map, "tautilde")?,
            lambda: get_f64(map, "lambda")?.unwrap_or(0.0),
            steps,
            snapshots,
            exact_r0: get_f64(map, "exact.r0")?,
            newton_tol: get_f64(map, "solver.newton_tol")?.unwrap_or(1e-9),
            max_newton_iter: get_usize(map, "solver.max_iter")?.unwrap_or(50),
            theta0: get_f64(map, "solver.theta0")?.unwrap_or(1e-3),
            seed: get_usize(map, "seed")?.unwrap_or(0) as u64,
            study,
        })
    }

    /// Normalized key-value image of this configuration; parsing it back
    /// yields an equivalent configuration.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        match &self.anisotropy {
            AnisotropySpec::Isotropic => put("anisotropy.kind", "isotropic".into()),
            AnisotropySpec::Elliptic { a1, a2 } => {
                put("anisotropy.kind", "elliptic".into());
                put("anisotropy.a1", format!("{a1}"));
                put("anisotropy.a2", format!("{a2}"));
            }
            AnisotropySpec::RegL1 { eps } => {
                put("anisotropy.kind", "regl1".into());
                put("anisotropy.eps", format!("{eps}"));
            }
            AnisotropySpec::RegLInf { eps } => {
                put("anisotropy.kind", "reglinf".into());
                put("anisotropy.eps", format!("{eps}"));
            }
        }
        match &self.initial {
            InitialSpec::Wulff { radius, vertices } => {
                put("initial.kind", "wulff".into());
                put("initial.radius", format!("{radius}"));
                put("initial.vertices", format!("{vertices}"));
            }
            InitialSpec::WulffArclength { radius, vertices } => {
                put("initial.kind", "wulff-arclength".into());
                put("initial.radius", format!("{radius}"));
                put("initial.vertices", format!("{vertices}"));
            }
            InitialSpec::MeshFile(p) => {
                put("initial.kind", "mesh".into());
                put("initial.path", p.clone());
            }
        }
        let put_law = |map: &mut BTreeMap<String, String>, prefix: &str, law: &TimeStepLaw| {
            let (name, value) = match law {
                TimeStepLaw::Absolute(v) => ("absolute", v),
                TimeStepLaw::ProportionalH0(v) => ("h0", v),
                TimeStepLaw::ProportionalH0Sq(v) => ("h0sq", v),
            };
            map.insert(format!("{prefix}.law"), name.to_string());
            map.insert(format!("{prefix}.value"), format!("{value}"));
        };
        put_law(&mut map, "tau", &self.tau);
        put_law(&mut map, "tautilde", &self.tau_tilde);
        map.insert("lambda".into(), format!("{}", self.lambda));
        map.insert("steps".into(), format!("{}", self.steps));
        if !self.snapshots.is_empty() {
            let s: Vec<String> = self.snapshots.iter().map(|v| v.to_string()).collect();
            map.insert("snapshots".into(), s.join(","));
        }
        if let Some(r0) = self.exact_r0 {
            map.insert("exact.r0".into(), format!("{r0}"));
        }
        map.insert("solver.newton_tol".into(), format!("{}", self.newton_tol));
        map.insert("solver.max_iter".into(), format!("{}", self.max_newton_iter));
        map.insert("solver.theta0".into(), format!("{}", self.theta0));
        map.insert("seed".into(), format!("{}", self.seed));
        if let Some(st) = &self.study {
            map.insert("study.n_min".into(), format!("{}", st.n_min));
            map.insert("study.n_max".into(), format!("{}", st.n_max));
            map.insert("study.time".into(), format!("{}", st.time));
            if let Some(c) = st.h0_constant {
                map.insert("study.h0_constant".into(), format!("{c}"));
            }
            map.insert(
                "study.sampling".into(),
                match st.sampling {
                    SamplingKind::GaussMap => "gauss".into(),
                    SamplingKind::ArcLength => "arclength".into(),
                },
            );
        }
        map
    }

    /// Rendered back as flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_map() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn build_model(&self) -> Result<AnisotropyModel> {
        match &self.anisotropy {
            AnisotropySpec::Isotropic => Ok(AnisotropyModel::isotropic()),
            AnisotropySpec::Elliptic { a1, a2 } => AnisotropyModel::elliptic(*a1, *a2),
            AnisotropySpec::RegL1 { eps } => AnisotropyModel::reg_l1(*eps),
            AnisotropySpec::RegLInf { eps } => AnisotropyModel::reg_linf(*eps),
        }
    }

    pub fn build_initial(&self, model: &AnisotropyModel) -> Result<SimplicialSurface> {
        match &self.initial {
            InitialSpec::Wulff { radius, vertices } => {
                SimplicialSurface::closed_curve(&model.wulff_sample(*radius, *vertices)?)
            }
            InitialSpec::WulffArclength { radius, vertices } => {
                SimplicialSurface::closed_curve(&model.wulff_sample_arclength(*radius, *vertices)?)
            }
            InitialSpec::MeshFile(p) => SimplicialSurface::read_mesh_file(p),
        }
    }

    /// Solver configuration with the time-step laws applied at grid size `h0`.
    pub fn solver_config(&self, h0: f64) -> SolverConfig {
        let mut s = SolverConfig::new(self.tau.step(h0), self.tau_tilde.step(h0));
        s.lambda = self.lambda;
        s.steps = self.steps;
        s.newton_tol = self.newton_tol;
        s.max_newton_iter = self.max_newton_iter;
        s.theta0 = self.theta0;
        s
    }

    pub fn study_config(&self, threads: usize) -> Result<StudyConfig> {
        let st = self
            .study
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("configuration has no study.* keys".into()))?;
        let radius = match &self.initial {
            InitialSpec::Wulff { radius, .. } | InitialSpec::WulffArclength { radius, .. } => *radius,
            InitialSpec::MeshFile(_) => {
                return Err(Error::InvalidConfig("studies sample the dual unit ball; mesh initial data is not supported".into()))
            }
        };
        let mut solver = SolverConfig::new(1.0, 1.0);
        solver.newton_tol = self.newton_tol;
        solver.max_newton_iter = self.max_newton_iter;
        solver.theta0 = self.theta0;
        solver.lambda = self.lambda;
        Ok(StudyConfig {
            n_min: st.n_min,
            n_max: st.n_max,
            target_time: st.time,
            law: self.tau,
            h0_constant: st.h0_constant,
            r0: radius,
            sampling: st.sampling,
            solver,
            threads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# circle benchmark
anisotropy.kind = isotropic
initial.kind = wulff
initial.radius = 1.0
initial.vertices = 64
tau.law = h0
tau.value = 1.0
tautilde.law = h0sq
tautilde.value = 1.0
steps = 500
snapshots = 0,10,50,100,500
exact.r0 = 1.0
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_text(SAMPLE).unwrap();
        assert_eq!(cfg.steps, 500);
        assert_eq!(cfg.snapshots, vec![0, 10, 50, 100, 500]);
        assert!(matches!(cfg.initial, InitialSpec::Wulff { vertices: 64, .. }));
        let text = cfg.to_text();
        let cfg2 = RunConfig::from_text(&text).unwrap();
        assert_eq!(cfg2.steps, cfg.steps);
        assert_eq!(cfg2.snapshots, cfg.snapshots);
        assert_eq!(cfg2.to_text(), text);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_text("bogus = 1\n").is_err());
        assert!(RunConfig::from_text("anisotropy.kind = weird\ntau.value = 1\ntautilde.value = 1\n").is_err());
        let over = "anisotropy.kind = isotropic\ninitial.vertices = 8\ntau.value = 1\ntautilde.value = 1\nsteps = 2\nsnapshots = 5\n";
        assert!(RunConfig::from_text(over).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# comment\nanisotropy.kind = isotropic # trailing\ninitial.vertices = 8\ntau.value = 0.1\ntautilde.value = 0.1\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert!(matches!(cfg.anisotropy, AnisotropySpec::Isotropic));
    }
}
