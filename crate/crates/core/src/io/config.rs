//! `key = value` run configuration with strict validation: unknown keys are
//! errors, and a run selects either a fixed step or an adaptive block, never
//! both.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::integrators::AdaptiveParams;
use crate::models::{CoupledModel, ScalarModel};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    AllenCahn {
        eps: f64,
    },
    CahnHilliard {
        eps: f64,
    },
    Mbe {
        eps: f64,
        mobility: f64,
    },
    Coupled {
        eps_u: f64,
        eps_v: f64,
        sigma: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        m_u: f64,
        m_v: f64,
        s_u: f64,
        s_v: f64,
    },
}

impl ModelConfig {
    pub fn is_coupled(&self) -> bool {
        matches!(self, ModelConfig::Coupled { .. })
    }

    pub fn scalar_model(&self) -> Option<ScalarModel> {
        match *self {
            ModelConfig::AllenCahn { eps } => Some(ScalarModel::allen_cahn(eps)),
            ModelConfig::CahnHilliard { eps } => Some(ScalarModel::cahn_hilliard(eps)),
            ModelConfig::Mbe { eps, mobility } => Some(ScalarModel::mbe(eps, mobility)),
            ModelConfig::Coupled { .. } => None,
        }
    }

    pub fn coupled_model(&self) -> Option<CoupledModel> {
        match *self {
            ModelConfig::Coupled {
                eps_u,
                eps_v,
                sigma,
                alpha,
                beta,
                gamma,
                m_u,
                m_v,
                s_u,
                s_v,
            } => Some(
                CoupledModel::new(eps_u, eps_v, sigma, alpha, beta, gamma)
                    .with_mobilities(m_u, m_v)
                    .with_stabilization(s_u, s_v),
            ),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeName {
    Be1,
    Cn,
    Bdf2,
}

impl SchemeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeName::Be1 => "be1",
            SchemeName::Cn => "cn",
            SchemeName::Bdf2 => "bdf2",
        }
    }

    pub fn to_scalar(self) -> crate::integrators::ScalarScheme {
        match self {
            SchemeName::Be1 => crate::integrators::ScalarScheme::Be1,
            SchemeName::Cn => crate::integrators::ScalarScheme::Cn,
            SchemeName::Bdf2 => crate::integrators::ScalarScheme::Bdf2,
        }
    }

    pub fn to_coupled(self) -> crate::integrators::CoupledScheme {
        match self {
            SchemeName::Be1 => crate::integrators::CoupledScheme::Be1,
            SchemeName::Cn => crate::integrators::CoupledScheme::Cn,
            SchemeName::Bdf2 => crate::integrators::CoupledScheme::Bdf2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Timing {
    Fixed { dt: f64 },
    Adaptive(AdaptiveParams),
    /// No single step size: the run is driven by `dt_list` (accuracy studies).
    Sweep,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IcConfig {
    Random {
        lo: f64,
        hi: f64,
        shift: f64,
        zero_mean: bool,
    },
    Manufactured,
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub scheme: SchemeName,
    pub timing: Timing,
    pub t_end: f64,
    pub seed: u64,
    pub ic: IcConfig,
    pub output_dir: PathBuf,
    pub record_every: u64,
    pub snapshot_every: u64,
    pub snapshot_times: Vec<f64>,
    /// Step sizes for accuracy studies; unused by plain simulations.
    pub dt_list: Vec<f64>,
    /// Bridge multiplier non-convergence with reduced substeps instead of
    /// aborting (fixed-step runs only).
    pub rescue: bool,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct KeyMap {
    entries: BTreeMap<String, String>,
}

impl KeyMap {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err(format!("bad value `{v}` for key `{key}`"))),
        }
    }

    fn require_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.take_parse(key)?
            .ok_or_else(|| err(format!("missing required key `{key}`")))
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(err(format!("bad boolean `{v}` for key `{key}`"))),
            },
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for item in v.split(',') {
                    let item = item.trim();
                    if item.is_empty() {
                        continue;
                    }
                    out.push(
                        item.parse::<f64>()
                            .map_err(|_| err(format!("bad number `{item}` in list `{key}`")))?,
                    );
                }
                Ok(Some(out))
            }
        }
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    fn reject_leftovers(&self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(err(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

/// Interface parameter given either directly (`eps`) or squared (`eps2`),
/// matching how the parameter sets are usually quoted.
fn scalar_eps(map: &mut KeyMap) -> Result<f64> {
    let eps = map.take_parse::<f64>("eps")?;
    let eps2 = map.take_parse::<f64>("eps2")?;
    match (eps, eps2) {
        (Some(_), Some(_)) => Err(err("give either `eps` or `eps2`, not both")),
        (Some(e), None) => Ok(e),
        (None, Some(e2)) if e2 > 0.0 => Ok(e2.sqrt()),
        (None, Some(_)) => Err(err("`eps2` must be positive")),
        (None, None) => Err(err("missing required key `eps` (or `eps2`)")),
    }
}

fn split_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
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
            .ok_or_else(|| err(format!("line {}: expected `key = value`", lineno + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a config, applying `overrides` (same `key=value` syntax) on top.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    for (k, v) in split_lines(text)? {
        if entries.insert(k.clone(), v).is_some() {
            return Err(err(format!("duplicate key `{k}`")));
        }
    }
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| err(format!("override `{item}`: expected key=value")))?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut map = KeyMap { entries };

    let model_name = map
        .take("model")
        .ok_or_else(|| err("missing required key `model`"))?;
    let model = match model_name.as_str() {
        "allen-cahn" => ModelConfig::AllenCahn {
            eps: scalar_eps(&mut map)?,
        },
        "cahn-hilliard" => ModelConfig::CahnHilliard {
            eps: scalar_eps(&mut map)?,
        },
        "mbe" => ModelConfig::Mbe {
            eps: scalar_eps(&mut map)?,
            mobility: map.take_parse("mobility")?.unwrap_or(1.0),
        },
        "coupled" => ModelConfig::Coupled {
            eps_u: map.require_parse("eps_u")?,
            eps_v: map.require_parse("eps_v")?,
            sigma: map.require_parse("sigma")?,
            alpha: map.require_parse("alpha")?,
            beta: map.require_parse("beta")?,
            gamma: map.require_parse("gamma")?,
            m_u: map.take_parse("m_u")?.unwrap_or(1.0),
            m_v: map.take_parse("m_v")?.unwrap_or(1.0),
            s_u: map.take_parse("s_u")?.unwrap_or(0.0),
            s_v: map.take_parse("s_v")?.unwrap_or(0.0),
        },
        other => {
            return Err(err(format!(
                "unknown model `{other}` (expected allen-cahn, cahn-hilliard, mbe, or coupled)"
            )))
        }
    };

    let nx: usize = map.require_parse("nx")?;
    let ny: usize = map.take_parse("ny")?.unwrap_or(nx);
    let two_pi = 2.0 * std::f64::consts::PI;
    let lx: f64 = map.take_parse("lx")?.unwrap_or(two_pi);
    let ly: f64 = map.take_parse("ly")?.unwrap_or(two_pi);

    let scheme = match map
        .take("scheme")
        .ok_or_else(|| err("missing required key `scheme`"))?
        .as_str()
    {
        "be1" => SchemeName::Be1,
        "cn" => SchemeName::Cn,
        "bdf2" => SchemeName::Bdf2,
        other => return Err(err(format!("unknown scheme `{other}`"))),
    };

    let dt = map.take_parse::<f64>("dt")?;
    let has_adaptive = map.has_prefix("adaptive.");
    let timing = match (dt, has_adaptive) {
        (Some(_), true) => {
            return Err(err("conflicting keys: both `dt` and an `adaptive.*` block are present"))
        }
        (Some(dt), false) => {
            if dt <= 0.0 {
                return Err(err("`dt` must be positive"));
            }
            Timing::Fixed { dt }
        }
        (None, true) => {
            let d = AdaptiveParams::default();
            let dt_min = map.take_parse("adaptive.dt_min")?.unwrap_or(d.dt_min);
            let params = AdaptiveParams {
                tol: map.take_parse("adaptive.tol")?.unwrap_or(d.tol),
                rho: map.take_parse("adaptive.rho")?.unwrap_or(d.rho),
                dt_min,
                dt_max: map.take_parse("adaptive.dt_max")?.unwrap_or(d.dt_max),
                dt_init: map.take_parse("adaptive.dt_init")?.unwrap_or(dt_min),
            };
            params.validate()?;
            Timing::Adaptive(params)
        }
        (None, false) => {
            // Accuracy studies may drive the run purely from dt_list.
            if map.entries.contains_key("dt_list") {
                Timing::Sweep
            } else {
                return Err(err("missing `dt` (or an `adaptive.*` block, or `dt_list`)"));
            }
        }
    };

    let t_end: f64 = map.require_parse("t_end")?;
    if t_end <= 0.0 {
        return Err(err("`t_end` must be positive"));
    }

    let ic = match map.take("ic").as_deref().unwrap_or("random") {
        "random" => IcConfig::Random {
            lo: map.take_parse("ic.lo")?.unwrap_or(-1.0),
            hi: map.take_parse("ic.hi")?.unwrap_or(1.0),
            shift: map.take_parse("ic.shift")?.unwrap_or(0.0),
            zero_mean: map.take_bool("ic.zero_mean")?.unwrap_or(false),
        },
        "manufactured" => IcConfig::Manufactured,
        "file" => IcConfig::File {
            path: PathBuf::from(
                map.take("ic.path")
                    .ok_or_else(|| err("ic = file requires `ic.path`"))?,
            ),
        },
        other => return Err(err(format!("unknown ic kind `{other}`"))),
    };
    if let IcConfig::Random { lo, hi, .. } = ic {
        if lo >= hi {
            return Err(err("ic.lo must be below ic.hi"));
        }
    }

    let seed: u64 = match ic {
        IcConfig::Random { .. } => map.require_parse("seed")?,
        _ => map.take_parse("seed")?.unwrap_or(0),
    };

    let config = RunConfig {
        model,
        nx,
        ny,
        lx,
        ly,
        scheme,
        timing,
        t_end,
        seed,
        ic,
        output_dir: PathBuf::from(map.take("output_dir").unwrap_or_else(|| "out".to_string())),
        record_every: map.take_parse("record_every")?.unwrap_or(1),
        snapshot_every: map.take_parse("snapshot_every")?.unwrap_or(0),
        snapshot_times: map.take_list("snapshot.times")?.unwrap_or_default(),
        dt_list: map.take_list("dt_list")?.unwrap_or_default(),
        rescue: map.take_bool("rescue")?.unwrap_or(false),
    };
    map.reject_leftovers()?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.record_every == 0 {
            return Err(err("`record_every` must be at least 1"));
        }
        if matches!(self.timing, Timing::Adaptive(_)) {
            if !self.model.is_coupled() {
                return Err(err("adaptive stepping is only available for the coupled model"));
            }
            if self.scheme != SchemeName::Cn {
                return Err(err("adaptive stepping uses the cn scheme"));
            }
            if matches!(self.ic, IcConfig::Manufactured) {
                return Err(err("adaptive runs do not support manufactured forcing"));
            }
        }
        if matches!(self.ic, IcConfig::Manufactured) && matches!(self.model, ModelConfig::Mbe { .. })
        {
            return Err(err("no manufactured profile is defined for the mbe model"));
        }
        Ok(())
    }

    /// Canonical `key = value` echo; re-parses to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.model {
            ModelConfig::AllenCahn { eps } => {
                s.push_str("model = allen-cahn\n");
                s.push_str(&format!("eps = {eps}\n"));
            }
            ModelConfig::CahnHilliard { eps } => {
                s.push_str("model = cahn-hilliard\n");
                s.push_str(&format!("eps = {eps}\n"));
            }
            ModelConfig::Mbe { eps, mobility } => {
                s.push_str("model = mbe\n");
                s.push_str(&format!("eps = {eps}\nmobility = {mobility}\n"));
            }
            ModelConfig::Coupled {
                eps_u,
                eps_v,
                sigma,
                alpha,
                beta,
                gamma,
                m_u,
                m_v,
                s_u,
                s_v,
            } => {
                s.push_str("model = coupled\n");
                s.push_str(&format!("eps_u = {eps_u}\neps_v = {eps_v}\nsigma = {sigma}\n"));
                s.push_str(&format!("alpha = {alpha}\nbeta = {beta}\ngamma = {gamma}\n"));
                s.push_str(&format!("m_u = {m_u}\nm_v = {m_v}\ns_u = {s_u}\ns_v = {s_v}\n"));
            }
        }
        s.push_str(&format!("nx = {}\nny = {}\n", self.nx, self.ny));
        s.push_str(&format!("lx = {}\nly = {}\n", self.lx, self.ly));
        s.push_str(&format!("scheme = {}\n", self.scheme.as_str()));
        match &self.timing {
            Timing::Sweep => {}
            Timing::Fixed { dt } => s.push_str(&format!("dt = {dt}\n")),
            Timing::Adaptive(p) => {
                s.push_str(&format!("adaptive.tol = {}\n", p.tol));
                s.push_str(&format!("adaptive.rho = {}\n", p.rho));
                s.push_str(&format!("adaptive.dt_min = {}\n", p.dt_min));
                s.push_str(&format!("adaptive.dt_max = {}\n", p.dt_max));
                s.push_str(&format!("adaptive.dt_init = {}\n", p.dt_init));
            }
        }
        s.push_str(&format!("t_end = {}\n", self.t_end));
        match &self.ic {
            IcConfig::Random {
                lo,
                hi,
                shift,
                zero_mean,
            } => {
                s.push_str("ic = random\n");
                s.push_str(&format!(
                    "ic.lo = {lo}\nic.hi = {hi}\nic.shift = {shift}\nic.zero_mean = {zero_mean}\n"
                ));
            }
            IcConfig::Manufactured => s.push_str("ic = manufactured\n"),
            IcConfig::File { path } => {
                s.push_str("ic = file\n");
                s.push_str(&format!("ic.path = {}\n", path.display()));
            }
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        s.push_str(&format!("record_every = {}\n", self.record_every));
        s.push_str(&format!("snapshot_every = {}\n", self.snapshot_every));
        if self.rescue {
            s.push_str("rescue = true\n");
        }
        if !self.snapshot_times.is_empty() {
            let items: Vec<String> = self.snapshot_times.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("snapshot.times = {}\n", items.join(",")));
        }
        if !self.dt_list.is_empty() {
            let items: Vec<String> = self.dt_list.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("dt_list = {}\n", items.join(",")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_AC: &str = "\
model = allen-cahn
nx = 32
eps = 0.2
scheme = bdf2
dt = 1e-4
t_end = 0.01
seed = 7
";

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL_AC).unwrap();
        assert_eq!(c.nx, 32);
        assert_eq!(c.ny, 32);
        assert_eq!(c.scheme, SchemeName::Bdf2);
        assert!(matches!(c.timing, Timing::Fixed { dt } if (dt - 1e-4).abs() < 1e-20));
        assert!(matches!(c.ic, IcConfig::Random { .. }));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL_AC}epz = 0.02\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("epz"), "{e}");
    }

    #[test]
    fn dt_and_adaptive_conflict() {
        let text = format!("{MINIMAL_AC}adaptive.tol = 1e-3\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("conflicting"), "{e}");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# full config\n\n{MINIMAL_AC}# trailing comment\n");
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn adaptive_requires_coupled_cn() {
        let text = "\
model = coupled
nx = 16
eps_u = 0.075
eps_v = 0.075
sigma = 10
alpha = -0.23
beta = 0.5
gamma = 0
s_u = 5
s_v = 5
scheme = cn
adaptive.tol = 1e-3
t_end = 0.1
seed = 3
";
        let c = parse_config(text).unwrap();
        match c.timing {
            Timing::Adaptive(p) => {
                assert_eq!(p.tol, 1e-3);
                assert_eq!(p.rho, 0.6);
            }
            _ => panic!("expected adaptive timing"),
        }

        let bad = text.replace("scheme = cn", "scheme = bdf2");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn echo_round_trip() {
        for text in [
            MINIMAL_AC.to_string(),
            "model = coupled\nnx = 16\neps_u = 0.05\neps_v = 0.05\nsigma = 10\nalpha = -0.1\n\
             beta = 0.75\ngamma = 0\ns_u = 1\ns_v = 1\nscheme = cn\nadaptive.tol = 1e-3\n\
             t_end = 0.5\nseed = 11\nic.zero_mean = true\nsnapshot.times = 0.02,0.1,0.5\n"
                .to_string(),
            format!("{MINIMAL_AC}ic = manufactured\ndt_list = 2e-3,1e-3\n"),
            format!(
                "{}ic = manufactured\ndt_list = 2e-3,1e-3\n",
                MINIMAL_AC.replace("dt = 1e-4\n", "")
            ),
        ] {
            let c = parse_config(&text).unwrap();
            let echoed = parse_config(&c.to_text()).unwrap();
            assert_eq!(c, echoed, "echo failed for\n{text}");
        }
    }

    #[test]
    fn overrides_replace_values() {
        let c = parse_config_with_overrides(MINIMAL_AC, &["dt=5e-5".to_string()]).unwrap();
        assert!(matches!(c.timing, Timing::Fixed { dt } if (dt - 5e-5).abs() < 1e-20));
        let e = parse_config_with_overrides(MINIMAL_AC, &["bogus=1".to_string()]).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn missing_required_key_is_reported() {
        let e = parse_config("model = allen-cahn\nnx = 16\nscheme = cn\ndt = 1e-3\nt_end = 1\nseed = 1\n")
            .unwrap_err();
        assert!(e.to_string().contains("eps"), "{e}");
    }
}
