//! Study configuration: flat `key = value` text plus per-key overrides.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ParamCurve, DOF_CAP};
use crate::probes::{DEFAULT_EPSILON, DEFAULT_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Norms,
    Qo,
    Iterations,
    EtaSign,
    Dtn,
    Probes,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Norms => "norms",
            StudyKind::Qo => "qo",
            StudyKind::Iterations => "iterations",
            StudyKind::EtaSign => "eta_sign",
            StudyKind::Dtn => "dtn",
            StudyKind::Probes => "probes",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "norms" => StudyKind::Norms,
            "qo" => StudyKind::Qo,
            "iterations" => StudyKind::Iterations,
            "eta_sign" | "eta-sign" => StudyKind::EtaSign,
            "dtn" => StudyKind::Dtn,
            "probes" => StudyKind::Probes,
            _ => return None,
        })
    }

    fn solves(self) -> bool {
        matches!(self, StudyKind::Qo | StudyKind::Iterations | StudyKind::EtaSign)
    }

    fn default_k_list(self) -> Vec<f64> {
        let geometric = |lo: u32, hi: u32| (lo..=hi).map(|p| 2f64.powi(p as i32)).collect();
        match self {
            StudyKind::Norms | StudyKind::Iterations => geometric(3, 8),
            StudyKind::Qo => geometric(3, 7),
            StudyKind::EtaSign => geometric(4, 6),
            StudyKind::Dtn => vec![50.0, 100.0, 200.0],
            StudyKind::Probes => geometric(5, 8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Circle,
    Ellipse,
    Kite,
    Segment,
    Parabola,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Circle => "circle",
            GeometryKind::Ellipse => "ellipse",
            GeometryKind::Kite => "kite",
            GeometryKind::Segment => "segment",
            GeometryKind::Parabola => "parabola",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "circle" => GeometryKind::Circle,
            "ellipse" => GeometryKind::Ellipse,
            "kite" => GeometryKind::Kite,
            "segment" => GeometryKind::Segment,
            "parabola" => GeometryKind::Parabola,
            _ => return None,
        })
    }
}

/// `hk = const` (fixed points per wavelength) or `hk^{4/3} = const`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshRule {
    Hk,
    Hk43,
}

impl MeshRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hk" => Some(MeshRule::Hk),
            "hk43" | "hk4/3" => Some(MeshRule::Hk43),
            _ => None,
        }
    }
}

/// `η = factor · k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRule {
    pub factor: f64,
}

impl EtaRule {
    pub const PLUS_K: EtaRule = EtaRule { factor: 1.0 };
    pub const MINUS_K: EtaRule = EtaRule { factor: -1.0 };

    pub fn eta(self, k: f64) -> f64 {
        self.factor * k
    }

    /// Accepts `k`, `-k`, `0`, `<c>k`, `<c>*k` and `<c>·k`.
    pub fn parse(s: &str) -> Option<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "0" {
            return Some(EtaRule { factor: 0.0 });
        }
        let stem = t.strip_suffix('k')?;
        let stem = stem.strip_suffix('*').or_else(|| stem.strip_suffix('·')).unwrap_or(stem);
        let factor = match stem {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().ok().filter(|v| v.is_finite())?,
        };
        Some(EtaRule { factor })
    }
}

impl fmt::Display for EtaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.factor {
            x if x == 0.0 => write!(f, "0"),
            x if x == 1.0 => write!(f, "k"),
            x if x == -1.0 => write!(f, "-k"),
            x => write!(f, "{x}k"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub geometry: GeometryKind,
    pub radius: f64,
    /// Ellipse semi-axes.
    pub axes: [f64; 2],
    pub k_list: Vec<f64>,
    pub ppw: f64,
    pub mesh_rule: MeshRule,
    /// Wavenumber at which the `hk^{4/3}` rule matches the `ppw` mesh.
    pub anchor_k: f64,
    pub eta: EtaRule,
    pub tol: f64,
    /// GMRES iteration cap; `None` means the number of unknowns.
    pub maxit: Option<usize>,
    pub dof_cap: usize,
    /// Largest system for which the dense inverse norm is computed.
    pub inverse_cap: usize,
    /// Second mesh density for the refinement comparison in the qo study.
    pub compare_ppw: Option<f64>,
    pub epsilon: f64,
    pub m: f64,
    pub fraction: f64,
}

const KEYS: &[&str] = &[
    "study",
    "geometry",
    "radius",
    "axes",
    "k",
    "k_list",
    "ppw",
    "mesh_rule",
    "anchor_k",
    "eta",
    "tol",
    "maxit",
    "dof_cap",
    "inverse_cap",
    "compare_ppw",
    "epsilon",
    "m",
    "fraction",
];

/// Collects `key = value` pairs; later [`ConfigBuilder::set`] calls override.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    values: BTreeMap<String, String>,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(key, format!("expected a finite number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::config(key, format!("expected a nonnegative integer, got `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses config text. `#` starts a comment; blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut b = Self::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(line, "expected `key = value`"));
            };
            let key = key.trim();
            if b.values.contains_key(key) {
                return Err(Error::config(key, "key given twice"));
            }
            b.set(key, value.trim())?;
        }
        Ok(b)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(self)
    }

    pub fn unset(&mut self, key: &str) -> &mut Self {
        self.values.remove(key);
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn build(&self) -> Result<StudyConfig> {
        let study_raw = self.get("study").ok_or_else(|| Error::config("study", "missing"))?;
        let study = StudyKind::parse(study_raw)
            .ok_or_else(|| Error::config("study", format!("unknown study `{study_raw}`")))?;
        let geometry = match self.get("geometry") {
            Some(g) => GeometryKind::parse(g).ok_or_else(|| Error::config("geometry", format!("unknown geometry `{g}`")))?,
            None if study == StudyKind::Probes => GeometryKind::Segment,
            None => GeometryKind::Circle,
        };
        let num = |key: &str, default: f64| self.get(key).map(|v| parse_f64(key, v)).unwrap_or(Ok(default));
        let k_list = match (self.get("k"), self.get("k_list")) {
            (Some(_), Some(_)) => return Err(Error::config("k", "give either k or k_list, not both")),
            (Some(v), None) => vec![parse_f64("k", v)?],
            (None, Some(v)) => parse_list("k_list", v)?,
            (None, None) => study.default_k_list(),
        };
        let axes = match self.get("axes") {
            Some(v) => {
                let a = parse_list("axes", v)?;
                if a.len() != 2 {
                    return Err(Error::config("axes", "expected two semi-axes `a1,a2`"));
                }
                [a[0], a[1]]
            }
            None => [1.0, 0.5],
        };
        let mesh_rule = match self.get("mesh_rule") {
            Some(v) => MeshRule::parse(v).ok_or_else(|| Error::config("mesh_rule", format!("expected hk or hk43, got `{v}`")))?,
            None => MeshRule::Hk,
        };
        let eta = match self.get("eta") {
            Some(v) => EtaRule::parse(v).ok_or_else(|| Error::config("eta", format!("expected k, -k, <c>k or 0, got `{v}`")))?,
            None => EtaRule::PLUS_K,
        };
        let ppw = num("ppw", 10.0)?;
        let compare_ppw = match self.get("compare_ppw") {
            Some("none") => None,
            Some(v) => Some(parse_f64("compare_ppw", v)?),
            None if study == StudyKind::Qo => Some(2.0 * ppw),
            None => None,
        };
        let cfg = StudyConfig {
            study,
            geometry,
            radius: num("radius", 1.0)?,
            axes,
            k_list,
            ppw,
            mesh_rule,
            anchor_k: num("anchor_k", 8.0)?,
            eta,
            tol: num("tol", 1e-5)?,
            maxit: self.get("maxit").map(|v| parse_usize("maxit", v)).transpose()?,
            dof_cap: self.get("dof_cap").map(|v| parse_usize("dof_cap", v)).transpose()?.unwrap_or(DOF_CAP),
            inverse_cap: self.get("inverse_cap").map(|v| parse_usize("inverse_cap", v)).transpose()?.unwrap_or(1500),
            compare_ppw,
            epsilon: num("epsilon", DEFAULT_EPSILON)?,
            m: num("m", DEFAULT_M)?,
            fraction: num("fraction", 0.9)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        ConfigBuilder::parse_text(text)?.build()
    }

    pub fn validate(&self) -> Result<()> {
        let key_list = "k_list";
        if self.k_list.is_empty() {
            return Err(Error::config(key_list, "empty"));
        }
        if self.k_list.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::config(key_list, "wavenumbers must be positive"));
        }
        if self.k_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(key_list, "must be strictly increasing"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("tol", "must lie in (0, 1)"));
        }
        if !(self.ppw >= 2.0) {
            return Err(Error::config("ppw", "must be at least 2"));
        }
        if let Some(p) = self.compare_ppw {
            if !(p > self.ppw) {
                return Err(Error::config("compare_ppw", "must exceed ppw"));
            }
        }
        if !(self.radius > 0.0) {
            return Err(Error::config("radius", "must be positive"));
        }
        if !(self.axes[0] > 0.0 && self.axes[1] > 0.0) {
            return Err(Error::config("axes", "semi-axes must be positive"));
        }
        if !(self.anchor_k > 0.0) {
            return Err(Error::config("anchor_k", "must be positive"));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::config("fraction", "must lie in (0, 1)"));
        }
        if self.maxit == Some(0) {
            return Err(Error::config("maxit", "must be positive"));
        }
        if self.study.solves() && self.eta.factor == 0.0 {
            return Err(Error::config("eta", "solver studies need η ≠ 0"));
        }
        if self.study == StudyKind::Iterations && self.eta.factor <= 0.0 {
            return Err(Error::config("eta", "the iteration study needs a positive multiple of k"));
        }
        use GeometryKind::*;
        let allowed: &[GeometryKind] = match self.study {
            StudyKind::Norms => &[Circle, Ellipse, Kite, Segment],
            StudyKind::Qo | StudyKind::EtaSign => &[Circle],
            StudyKind::Iterations => &[Circle, Ellipse, Kite],
            StudyKind::Dtn => &[Circle, Ellipse, Kite, Segment, Parabola],
            StudyKind::Probes => &[Segment, Parabola],
        };
        if !allowed.contains(&self.geometry) {
            return Err(Error::config(
                "geometry",
                format!("{} is not available for the {} study", self.geometry.name(), self.study.name()),
            ));
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<ParamCurve> {
        Ok(match self.geometry {
            GeometryKind::Circle => ParamCurve::circle(self.radius)?,
            GeometryKind::Ellipse => ParamCurve::ellipse(self.axes[0], self.axes[1])?,
            GeometryKind::Kite => ParamCurve::kite(),
            GeometryKind::Segment => ParamCurve::segment(),
            GeometryKind::Parabola => ParamCurve::parabola(),
        })
    }

    /// Panel count for `k` under the configured mesh rule.
    pub fn dof_for(&self, curve: &ParamCurve, k: f64, rule: MeshRule, ppw: f64) -> Result<usize> {
        let length = curve.length();
        let target = match rule {
            MeshRule::Hk => length * ppw * k / (2.0 * PI),
            // h k^{4/3} = (2π/ppw) k_a^{1/3}, i.e. the ppw mesh at k = k_a.
            MeshRule::Hk43 => length * k.powf(4.0 / 3.0) * ppw / (2.0 * PI * self.anchor_k.cbrt()),
        };
        let dof = ((target - 1e-9).ceil() as usize).max(3);
        if dof > self.dof_cap {
            return Err(Error::Capacity(format!("k = {k} needs {dof} panels, cap is {}", self.dof_cap)));
        }
        Ok(dof)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_text_with_comments() {
        let cfg = StudyConfig::parse(
            "# circle norms\nstudy = norms\ngeometry = circle\nk_list = 16, 32, 64\nppw = 10 # default\n",
        )
        .unwrap();
        assert_eq!(cfg.study, StudyKind::Norms);
        assert_eq!(cfg.k_list, vec![16.0, 32.0, 64.0]);
        assert_eq!(cfg.tol, 1e-5);
        assert_eq!(cfg.eta, EtaRule::PLUS_K);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match StudyConfig::parse(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(key_of("study = qo\nfoo = 1"), "foo");
        assert_eq!(key_of("geometry = circle"), "study");
        assert_eq!(key_of("study = qo\nk_list = 16, 8"), "k_list");
        assert_eq!(key_of("study = qo\nk_list = 16, x"), "k_list");
        assert_eq!(key_of("study = qo\neta = 0"), "eta");
        assert_eq!(key_of("study = qo\neta = banana"), "eta");
        assert_eq!(key_of("study = qo\ngeometry = segment"), "geometry");
        assert_eq!(key_of("study = qo\ntol = 2"), "tol");
        assert_eq!(key_of("study = qo\nstudy = norms"), "study");
        assert_eq!(key_of("study = qo\njust words"), "just words");
        assert_eq!(key_of("study = qo\nmaxit = -3"), "maxit");
    }

    #[test]
    fn eta_rules() {
        assert_eq!(EtaRule::parse("k"), Some(EtaRule::PLUS_K));
        assert_eq!(EtaRule::parse("-k"), Some(EtaRule::MINUS_K));
        assert_eq!(EtaRule::parse("0").unwrap().factor, 0.0);
        assert_eq!(EtaRule::parse("2.5k").unwrap().factor, 2.5);
        assert_eq!(EtaRule::parse("0.5*k").unwrap().factor, 0.5);
        assert_eq!(EtaRule::parse("-3·k").unwrap().factor, -3.0);
        assert!(EtaRule::parse("k2").is_none());
        for r in ["k", "-k", "0", "2.5k"] {
            let e = EtaRule::parse(r).unwrap();
            assert_eq!(EtaRule::parse(&e.to_string()), Some(e));
        }
    }

    #[test]
    fn mesh_rules() {
        let mut b = ConfigBuilder::new();
        b.set("study", "qo").unwrap();
        let cfg = b.build().unwrap();
        let circle = cfg.curve().unwrap();
        assert_eq!(cfg.dof_for(&circle, 8.0, MeshRule::Hk43, 10.0).unwrap(), 80);
        assert_eq!(cfg.dof_for(&circle, 8.0, MeshRule::Hk, 10.0).unwrap(), 80);
        assert_eq!(cfg.dof_for(&circle, 64.0, MeshRule::Hk43, 10.0).unwrap(), 1280);
        assert!(matches!(cfg.dof_for(&circle, 1000.0, MeshRule::Hk43, 10.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut b = ConfigBuilder::parse_text("study = norms\nk_list = 8,16").unwrap();
        b.set("k_list", "32,64,128").unwrap();
        assert_eq!(b.build().unwrap().k_list, vec![32.0, 64.0, 128.0]);
        assert!(b.set("bogus", "1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = StudyConfig::parse("study = norms").unwrap();
        let b = StudyConfig::parse("study = norms\nppw = 12").unwrap();
        assert_eq!(a.hash(), StudyConfig::parse("study = norms").unwrap().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest! {
        #[test]
        fn parsing_never_panics(text in "[a-z_=,.0-9 \n#-]{0,80}") {
            let _ = StudyConfig::parse(&text);
        }

        #[test]
        fn numeric_keys_round_trip(ppw in 2.0f64..50.0, tol in 1e-12f64..0.5) {
            let text = format!("study = iterations\nppw = {ppw:?}\ntol = {tol:?}");
            let cfg = StudyConfig::parse(&text).unwrap();
            prop_assert_eq!(cfg.ppw, ppw);
            prop_assert_eq!(cfg.tol, tol);
        }
    }
}
