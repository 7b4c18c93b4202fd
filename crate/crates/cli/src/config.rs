//! Run configuration: an optional TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use negcurv::numerics::grid::{MIN_NR, MIN_NTHETA};
use negcurv::poisson::DecayingSource;
use negcurv::ricciflow::FlowConfig;
use negcurv::WarpedModel;

use crate::cache::CachePolicy;

/// Configuration problems map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Quick,
    Full,
}

impl std::str::FromStr for Profile {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            other => Err(config_error(format!(
                "unknown profile '{other}' (quick|full)"
            ))),
        }
    }
}

/// Keys accepted in a config file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub rmax: Option<f64>,
    pub nr: Option<usize>,
    pub ntheta: Option<usize>,
    pub poles: Option<String>,
    pub eps: Option<f64>,
    pub route: Option<String>,
    pub source: Option<String>,
    pub profile: Option<String>,
    pub out: Option<PathBuf>,
    pub cache: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub flow: Option<FlowConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| config_error(format!("malformed config {}: {e}", path.display())))
    }

    /// Fill unset keys of `self` from `base`.
    pub fn over(self, base: FileConfig) -> FileConfig {
        FileConfig {
            model: self.model.or(base.model),
            rmax: self.rmax.or(base.rmax),
            nr: self.nr.or(base.nr),
            ntheta: self.ntheta.or(base.ntheta),
            poles: self.poles.or(base.poles),
            eps: self.eps.or(base.eps),
            route: self.route.or(base.route),
            source: self.source.or(base.source),
            profile: self.profile.or(base.profile),
            out: self.out.or(base.out),
            cache: self.cache.or(base.cache),
            cache_dir: self.cache_dir.or(base.cache_dir),
            seed: self.seed.or(base.seed),
            flow: self.flow.or(base.flow),
        }
    }
}

/// Fully validated configuration, echoed into `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model_spec: String,
    pub model: WarpedModel,
    pub rmax: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub poles: Vec<f64>,
    pub eps: f64,
    pub route: String,
    pub source: String,
    pub profile: Profile,
    pub out: PathBuf,
    pub cache: CachePolicy,
    pub cache_dir: PathBuf,
    pub seed: u64,
    pub flow: FlowConfig,
}

/// Defaults per subcommand: `(rmax, nr, ntheta, poles)`.
fn grid_defaults(command: &str) -> (f64, usize, usize, &'static str) {
    match command {
        "spectrum" => (12.0, 384, 32, "0"),
        "green" => (8.0, 256, 64, "2,3,4,5"),
        "heat" => (1.0, 64, 32, "0,1,2,3"),
        "poisson" => (128.0, 1024, 32, "0,2,3,4,5"),
        _ => (8.0, 256, 32, "0"),
    }
}

pub fn resolve(command: &str, file: FileConfig) -> anyhow::Result<RunConfig> {
    let (rmax, nr, ntheta, poles) = grid_defaults(command);
    let model_spec = file.model.unwrap_or_else(|| "hyperbolic2".to_string());
    let rmax = file.rmax.unwrap_or(rmax);
    let nr = file.nr.unwrap_or(nr);
    let ntheta = file.ntheta.unwrap_or(ntheta);
    if !(rmax > 0.0 && rmax.is_finite()) || nr < MIN_NR || ntheta < MIN_NTHETA {
        return Err(config_error(format!(
            "grid needs rmax > 0, nr ≥ {MIN_NR} and ntheta ≥ {MIN_NTHETA}"
        )));
    }
    let seed = file.seed.unwrap_or(0);
    let poles = parse_poles(file.poles.as_deref().unwrap_or(poles), rmax, seed)?;
    let eps = file.eps.unwrap_or(1.0);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(config_error(format!("eps must be positive, got {eps}")));
    }
    let route = file.route.unwrap_or_else(|| "all".to_string());
    if !["radial", "green-integral", "exhaustion", "all"].contains(&route.as_str()) {
        return Err(config_error(format!(
            "unknown route '{route}' (radial|green-integral|exhaustion|all)"
        )));
    }
    let profile = file.profile.as_deref().unwrap_or("quick").parse()?;
    let out = file.out.unwrap_or_else(|| PathBuf::from("negcurv-out"));
    let cache: CachePolicy = file.cache.as_deref().unwrap_or("off").parse()?;
    let cache_dir = file.cache_dir.unwrap_or_else(|| out.join("cache"));
    let flow = file.flow.unwrap_or_default();
    if command == "flow" {
        flow.validate().map_err(|e| config_error(e.to_string()))?;
    }
    let model = parse_model(&model_spec)?;
    let source = file
        .source
        .unwrap_or_else(|| format!("powerlaw:C=1,eps={eps}"));
    if command == "poisson" {
        DecayingSource::parse(&source, &model).map_err(|e| config_error(e.to_string()))?;
    }
    Ok(RunConfig {
        command: command.to_string(),
        model,
        model_spec,
        rmax,
        nr,
        ntheta,
        poles,
        eps,
        route,
        source,
        profile,
        out,
        cache,
        cache_dir,
        seed,
        flow,
    })
}

/// `hyperbolic2`, `hyperbolic3`, `hyperbolic2:K=-0.5`, `perturbed`, `perturbed:eta=0.2`, `euclidean2`.
pub fn parse_model(spec: &str) -> anyhow::Result<WarpedModel> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = Vec::new();
    for item in params.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| config_error(format!("model parameter '{item}' is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| config_error(format!("model parameter '{k}' is not a number")))?;
        kv.push((k.trim().to_string(), v));
    }
    let get = |key: &str, default: f64| -> anyhow::Result<f64> {
        let mut value = default;
        for (k, v) in &kv {
            if k == key {
                value = *v;
            } else if !matches!(k.as_str(), "K" | "eta") {
                return Err(config_error(format!("unknown model parameter '{k}'")));
            }
        }
        Ok(value)
    };
    let (family, n) = match name.trim_end_matches(|c: char| c.is_ascii_digit()) {
        "hyperbolic" | "euclidean" => {
            let digits = &name[name.trim_end_matches(|c: char| c.is_ascii_digit()).len()..];
            let n = if digits.is_empty() {
                2
            } else {
                digits.parse()?
            };
            (name.trim_end_matches(|c: char| c.is_ascii_digit()), n)
        }
        "perturbed" => ("perturbed", 2),
        _ => return Err(config_error(format!("unknown model '{spec}'"))),
    };
    let model = match family {
        "hyperbolic" => WarpedModel::hyperbolic(n, get("K", -1.0)?),
        "perturbed" => WarpedModel::perturbed(n, get("eta", 0.1)?),
        _ => Ok(WarpedModel::euclidean(n)),
    };
    model.map_err(|e| config_error(e.to_string()))
}

/// `2,3,4` or `random:N`, the latter drawn uniformly from `[0, rmax/2)` with the seed.
pub fn parse_poles(spec: &str, rmax: f64, seed: u64) -> anyhow::Result<Vec<f64>> {
    if let Some(count) = spec.strip_prefix("random:") {
        let count: usize = count
            .parse()
            .map_err(|_| config_error(format!("'{spec}' needs a pole count")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut poles: Vec<f64> = (0..count)
            .map(|_| rng.random_range(0.0..0.5 * rmax))
            .collect();
        poles.sort_by(f64::total_cmp);
        return Ok(poles);
    }
    let poles = spec
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| config_error(format!("bad pole radius '{p}'")))
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    if poles.is_empty() || poles.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(config_error("pole radii must be finite and nonnegative"));
    }
    Ok(poles)
}

pub fn ensure_out_dir(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| {
        config_error(format!(
            "output directory {} is not writable: {e}",
            out.display()
        ))
    })?;
    let probe = out.join(".write-test");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| {
            config_error(format!(
                "output directory {} is not writable: {e}",
                out.display()
            ))
        })
}

pub fn require(cond: bool, msg: &str) -> anyhow::Result<()> {
    if cond {
        Ok(())
    } else {
        Err(config_error(msg))
    }
}

pub fn context_path<T>(r: std::io::Result<T>, path: &Path) -> anyhow::Result<T> {
    r.with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn models() {
        assert_eq!(
            parse_model("hyperbolic2").unwrap(),
            WarpedModel::hyperbolic(2, -1.0).unwrap()
        );
        assert_eq!(parse_model("hyperbolic3").unwrap().n, 3);
        assert_eq!(
            parse_model("hyperbolic2:K=-0.5").unwrap(),
            WarpedModel::hyperbolic(2, -0.5).unwrap()
        );
        assert_eq!(
            parse_model("perturbed").unwrap(),
            WarpedModel::perturbed(2, 0.1).unwrap()
        );
        assert!(parse_model("sphere2").is_err());
        assert!(parse_model("hyperbolic2:Q=1").is_err());
    }

    #[test]
    fn poles_are_seeded() {
        assert_eq!(parse_poles("2, 3", 8.0, 0).unwrap(), vec![2.0, 3.0]);
        let a = parse_poles("random:4", 8.0, 7).unwrap();
        assert_eq!(a, parse_poles("random:4", 8.0, 7).unwrap());
        assert_ne!(a, parse_poles("random:4", 8.0, 8).unwrap());
        assert!(a.iter().all(|p| (0.0..4.0).contains(p)));
        assert!(parse_poles("x", 8.0, 0).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig =
            toml::from_str("model = \"perturbed\"\nnr = 128\n[flow]\nt_final = 5.0\n").unwrap();
        let flags = FileConfig {
            nr: Some(64),
            ..Default::default()
        };
        let cfg = resolve("green", flags.over(file)).unwrap();
        assert_eq!((cfg.nr, cfg.model_spec.as_str()), (64, "perturbed"));
        assert_eq!(cfg.flow.t_final, 5.0);
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
        assert!(resolve(
            "poisson",
            FileConfig {
                route: Some("x".into()),
                ..Default::default()
            }
        )
        .is_err());
    }
}
