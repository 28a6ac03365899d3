use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use adapprox::bench::{
    bench_config, default_peak_lr, default_schedule, default_steps, Curvature, LrSchedule, Offset, ProblemKind,
    ProblemSpec, Setup,
};
use adapprox::lowrank::{RankExtension, Truncation};
use adapprox::optim::OptimizerKind;
use anyhow::{anyhow, bail, Context, Result};

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "logreg (quadratic for the clip ablation)"),
    ("opt", "adapprox; comma-separated list"),
    ("steps", "500 quadratic, 2000 logreg, 5000 mlp"),
    ("seeds", "the global --seed; `a..b`, `a,b,c` or a single value"),
    ("lr", "peak rate: 0.3 quadratic, 0.01 otherwise (ten times that for the clip ablation)"),
    ("lr_min", "lr / 10"),
    ("warmup", "steps / 50"),
    ("beta1", "0.9"),
    ("beta2", "0.999"),
    ("epsilon", "1e-8"),
    ("clip", "1; `none` disables clipping"),
    ("weight_decay", "0.1"),
    ("guidance", "false"),
    ("guidance_clamp", "10; `none` leaves the factor unbounded"),
    ("factor_min_dim", "16"),
    ("k_init", "1"),
    ("k_max_fraction", "0.25"),
    ("xi_thresh", "0.01"),
    ("delta_s", "10"),
    ("eta", "200"),
    ("omega", "-10"),
    ("phi", "2.5"),
    ("tau", "9"),
    ("min_growth", "1"),
    ("extension", "resample; or append"),
    ("power_iters", "5"),
    ("oversample", "5"),
    ("truncation", "rayleigh_ritz; or leading"),
    ("rows", "quadratic: 64"),
    ("cols", "quadratic: 48"),
    ("curvature", "quadratic: stiff; or rank1, blocks"),
    ("cond", "quadratic: 1e4"),
    ("blocks", "quadratic: 5"),
    ("floor", "quadratic: 0.01"),
    ("offset", "quadratic: gaussian; or uniform"),
    ("offset_scale", "quadratic: 1"),
    ("target_scale", "quadratic: 1"),
    ("samples", "logreg: 4096, mlp: 512"),
    ("features", "logreg: 64"),
    ("classes", "logreg: 16"),
    ("separation", "logreg: 0.5"),
    ("label_noise", "logreg: 0.02"),
    ("inputs", "mlp: 32"),
    ("hidden", "mlp: 256"),
    ("outputs", "mlp: 16"),
    ("teacher_hidden", "mlp: 16"),
    ("noise", "mlp: 0.1"),
    ("init_scale", "mlp: 1"),
    ("batch", "64 on logreg and mlp; `full` for full batch"),
    ("threshold", "ten times the AdamW final loss of the same seed, when AdamW runs"),
    ("timings", "false; record wall-clock step times"),
];

/// Key table for `--help`.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (`--key value` or `key = value` in --config):\n");
    for (k, d) in KEYS {
        out.push_str(&format!("  {k:<width$}  {d}\n"));
    }
    out
}

const QUADRATIC_KEYS: &[&str] = &[
    "rows",
    "cols",
    "curvature",
    "cond",
    "blocks",
    "floor",
    "offset",
    "offset_scale",
    "target_scale",
];
const LOGREG_KEYS: &[&str] = &["samples", "features", "classes", "separation", "label_noise", "batch"];
const MLP_KEYS: &[&str] = &[
    "samples",
    "inputs",
    "hidden",
    "outputs",
    "teacher_hidden",
    "noise",
    "init_scale",
    "batch",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    File { path: String, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path} line {line}"),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Key-value settings from a config file and command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

fn check_key(key: &str, origin: &Origin) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        bail!("{origin}: unknown key `{key}`")
    }
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File {
                path: path.to_string(),
                line: i + 1,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}: expected `key = value`, got `{line}`"))?;
            let key = key.trim();
            check_key(key, &origin)?;
            if out.entries.contains_key(key) {
                bail!("{origin}: key `{key}` set twice");
            }
            out.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin,
                },
            );
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `--key value` or `--key=value` words; later words win.
    pub fn apply_overrides(&mut self, words: &[String]) -> Result<()> {
        let mut it = words.iter();
        while let Some(word) = it.next() {
            let Some(flag) = word.strip_prefix("--") else {
                bail!("command line: expected `--key value`, got `{word}`");
            };
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| anyhow!("command line: key `{flag}` needs a value"))?;
                    (flag.to_string(), v.clone())
                }
            };
            let key = key.replace('-', "_");
            check_key(&key, &Origin::Flag)?;
            self.set(&key, &value);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin: Origin::Flag,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "undeclared key {key}");
        self.entries.get(key)
    }

    fn parse_with<T>(&self, key: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .map_err(|err| anyhow!("{}: invalid value `{}` for `{key}`: {err}", e.origin, e.value)),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.parse_with(key, |v| v.parse::<T>().map_err(|e| anyhow!("{e}")))
    }

    /// A number, or `None` for the literal `none`.
    fn get_optional(&self, key: &str) -> Result<Option<Option<f64>>> {
        self.parse_with(key, |v| match v {
            "none" => Ok(None),
            _ => Ok(Some(v.parse::<f64>()?)),
        })
    }

    fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, |v| match v.to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Ok(true),
            "false" | "off" | "no" | "0" => Ok(false),
            _ => bail!("expected true or false"),
        })
    }

    fn origin(&self, key: &str) -> String {
        self.raw(key).map_or_else(String::new, |e| e.origin.to_string())
    }
}

/// Parses `a..b` (exclusive), `a,b,c` or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        (a..b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse::<u64>()).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("empty seed list");
    }
    Ok(seeds)
}

/// Fully resolved settings of a `train` or `ablate` invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub setup: Setup,
    pub optimizers: Vec<OptimizerKind>,
    pub seeds: Vec<u64>,
    pub threshold: Option<f64>,
    pub timings: bool,
}

/// Command-dependent fallbacks.
#[derive(Clone, Debug)]
pub struct Defaults {
    pub problem: ProblemKind,
    pub seeds: Vec<u64>,
    pub lr_scale: f64,
}

fn apply_problem(settings: &Settings, spec: &mut ProblemSpec) -> Result<()> {
    let (kind, allowed) = match spec {
        ProblemSpec::Quadratic(_) => (ProblemKind::Quadratic, QUADRATIC_KEYS),
        ProblemSpec::Logreg(_) => (ProblemKind::Logreg, LOGREG_KEYS),
        ProblemSpec::Mlp(_) => (ProblemKind::Mlp, MLP_KEYS),
    };
    for key in QUADRATIC_KEYS.iter().chain(LOGREG_KEYS).chain(MLP_KEYS) {
        if settings.contains(key) && !allowed.contains(key) {
            bail!("{}: key `{key}` does not apply to problem {kind}", settings.origin(key));
        }
    }
    let batch = settings.parse_with("batch", |v| match v {
        "full" => Ok(None),
        _ => Ok(Some(v.parse::<usize>()?)),
    })?;
    match spec {
        ProblemSpec::Quadratic(q) => {
            q.rows = settings.get("rows")?.unwrap_or(q.rows);
            q.cols = settings.get("cols")?.unwrap_or(q.cols);
            let cond = settings.get("cond")?.unwrap_or(1e4);
            let blocks = settings.get("blocks")?.unwrap_or(5);
            let floor = settings.get("floor")?.unwrap_or(0.01);
            let curvature: Option<String> = settings.get("curvature")?;
            q.curvature = match curvature.as_deref().unwrap_or("stiff") {
                "stiff" => Curvature::Stiff { cond },
                "rank1" => Curvature::RankOne,
                "blocks" => Curvature::Blocks { count: blocks, floor },
                other => bail!("{}: unknown curvature `{other}`", settings.origin("curvature")),
            };
            let scale = settings.get("offset_scale")?.unwrap_or(1.0);
            let offset: Option<String> = settings.get("offset")?;
            q.offset = match offset.as_deref().unwrap_or("gaussian") {
                "gaussian" => Offset::Gaussian(scale),
                "uniform" => Offset::Uniform(scale),
                other => bail!("{}: unknown offset `{other}`", settings.origin("offset")),
            };
            q.target_scale = settings.get("target_scale")?.unwrap_or(q.target_scale);
        }
        ProblemSpec::Logreg(l) => {
            l.n_samples = settings.get("samples")?.unwrap_or(l.n_samples);
            l.n_features = settings.get("features")?.unwrap_or(l.n_features);
            l.n_classes = settings.get("classes")?.unwrap_or(l.n_classes);
            l.separation = settings.get("separation")?.unwrap_or(l.separation);
            l.label_noise = settings.get("label_noise")?.unwrap_or(l.label_noise);
            l.batch = batch.unwrap_or(l.batch);
        }
        ProblemSpec::Mlp(m) => {
            m.n_samples = settings.get("samples")?.unwrap_or(m.n_samples);
            m.n_in = settings.get("inputs")?.unwrap_or(m.n_in);
            m.n_hidden = settings.get("hidden")?.unwrap_or(m.n_hidden);
            m.n_out = settings.get("outputs")?.unwrap_or(m.n_out);
            m.teacher_hidden = settings.get("teacher_hidden")?.unwrap_or(m.teacher_hidden);
            m.noise = settings.get("noise")?.unwrap_or(m.noise);
            m.init_scale = settings.get("init_scale")?.unwrap_or(m.init_scale);
            m.batch = batch.unwrap_or(m.batch);
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn resolve(settings: &Settings, defaults: &Defaults) -> Result<Self> {
        let problem = settings.get::<ProblemKind>("problem")?.unwrap_or(defaults.problem);
        let mut spec = ProblemSpec::default_for(problem);
        apply_problem(settings, &mut spec)?;

        let optimizers = settings
            .parse_with("opt", |v| {
                v.split(',')
                    .map(|s| s.trim().parse::<OptimizerKind>().map_err(Into::into))
                    .collect::<Result<Vec<_>>>()
            })?
            .unwrap_or_else(|| vec![OptimizerKind::Adapprox]);
        let steps = settings.get::<u64>("steps")?.unwrap_or_else(|| default_steps(problem));
        let default_lr = default_peak_lr(problem) * defaults.lr_scale;
        let lr = settings.get::<f64>("lr")?.unwrap_or(default_lr);
        let base = default_schedule(lr, steps)?;
        let schedule = LrSchedule::new(
            lr,
            settings.get("lr_min")?.unwrap_or(base.min),
            settings.get("warmup")?.unwrap_or(base.warmup_steps),
            steps,
        )?;

        let mut config = bench_config();
        config.beta1 = settings.get("beta1")?.unwrap_or(config.beta1);
        config.beta2 = settings.get("beta2")?.unwrap_or(config.beta2);
        config.epsilon = settings.get("epsilon")?.unwrap_or(config.epsilon);
        config.clip_d = settings.get_optional("clip")?.unwrap_or(config.clip_d);
        config.weight_decay = settings.get("weight_decay")?.unwrap_or(config.weight_decay);
        config.cosine_guidance = settings.get_bool("guidance")?.unwrap_or(config.cosine_guidance);
        config.guidance_clamp = settings.get_optional("guidance_clamp")?.unwrap_or(config.guidance_clamp);
        config.factor_min_dim = settings.get("factor_min_dim")?.unwrap_or(config.factor_min_dim);
        let rp = &mut config.rank_policy;
        rp.k_init = settings.get("k_init")?.unwrap_or(rp.k_init);
        rp.k_max_fraction = settings.get("k_max_fraction")?.unwrap_or(rp.k_max_fraction);
        rp.xi_thresh = settings.get("xi_thresh")?.unwrap_or(rp.xi_thresh);
        rp.delta_s = settings.get("delta_s")?.unwrap_or(rp.delta_s);
        rp.eta = settings.get("eta")?.unwrap_or(rp.eta);
        rp.omega = settings.get("omega")?.unwrap_or(rp.omega);
        rp.phi = settings.get("phi")?.unwrap_or(rp.phi);
        rp.tau = settings.get("tau")?.unwrap_or(rp.tau);
        rp.min_growth = settings.get("min_growth")?.unwrap_or(rp.min_growth);
        if let Some(e) = settings.parse_with("extension", |v| match v {
            "resample" => Ok(RankExtension::Resample),
            "append" => Ok(RankExtension::Append),
            _ => bail!("expected resample or append"),
        })? {
            rp.extension = e;
        }
        let sm = &mut config.sampling;
        sm.power_iters = settings.get("power_iters")?.unwrap_or(sm.power_iters);
        sm.oversample = settings.get("oversample")?.unwrap_or(sm.oversample);
        if let Some(t) = settings.parse_with("truncation", |v| match v {
            "rayleigh_ritz" => Ok(Truncation::RayleighRitz),
            "leading" => Ok(Truncation::Leading),
            _ => bail!("expected rayleigh_ritz or leading"),
        })? {
            sm.truncation = t;
        }
        config.validate()?;

        let seeds = settings
            .parse_with("seeds", parse_seeds)?
            .unwrap_or_else(|| defaults.seeds.clone());
        Ok(Self {
            setup: Setup {
                problem: spec,
                config,
                schedule,
                steps,
            },
            optimizers,
            seeds,
            threshold: settings.get("threshold")?,
            timings: settings.get_bool("timings")?.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults {
            problem: ProblemKind::Logreg,
            seeds: vec![0],
            lr_scale: 1.0,
        }
    }

    #[test]
    fn parses_and_reports_lines() {
        let s = Settings::parse("# comment\nbeta1 = 0.5\n\nsteps=30  # trailing\n", "run.cfg").unwrap();
        let c = RunConfig::resolve(&s, &defaults()).unwrap();
        assert_eq!(c.setup.config.beta1, 0.5);
        assert_eq!(c.setup.steps, 30);
        assert_eq!(c.setup.schedule.total_steps, 30);

        let err = Settings::parse("steps = 3\nbeta3 = 0.1\n", "run.cfg").unwrap_err();
        assert_eq!(err.to_string(), "run.cfg line 2: unknown key `beta3`");
        let err = Settings::parse("steps 3\n", "run.cfg").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = Settings::parse("steps = 3\nsteps = 4\n", "run.cfg").unwrap_err();
        assert!(err.to_string().contains("twice"));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut s = Settings::parse("beta1 = 0.5\nclip = 2\n", "f").unwrap();
        s.apply_overrides(&["--beta1".into(), "0.8".into(), "--clip=none".into()]).unwrap();
        let c = RunConfig::resolve(&s, &defaults()).unwrap();
        assert_eq!(c.setup.config.beta1, 0.8);
        assert_eq!(c.setup.config.clip_d, None);
        let err = s.apply_overrides(&["--beta3".into(), "1".into()]).unwrap_err();
        assert_eq!(err.to_string(), "command line: unknown key `beta3`");
        assert!(s.apply_overrides(&["--steps".into()]).is_err());
        assert!(s.apply_overrides(&["steps".into(), "3".into()]).is_err());
    }

    #[test]
    fn bad_values_name_key_and_origin() {
        let s = Settings::parse("beta1 = fast\n", "f").unwrap();
        let err = RunConfig::resolve(&s, &defaults()).unwrap_err().to_string();
        assert!(err.starts_with("f line 1: invalid value `fast` for `beta1`"), "{err}");
        let s = Settings::parse("hidden = 8\n", "f").unwrap();
        let err = RunConfig::resolve(&s, &defaults()).unwrap_err().to_string();
        assert!(err.contains("does not apply to problem logreg"), "{err}");
        let s = Settings::parse("beta1 = 1.5\n", "f").unwrap();
        assert!(RunConfig::resolve(&s, &defaults()).is_err());
    }

    #[test]
    fn problem_keys() {
        let s = Settings::parse("problem = mlp\nhidden = 8\nbatch = full\nopt = adamw, adafactor\n", "f").unwrap();
        let c = RunConfig::resolve(&s, &defaults()).unwrap();
        let ProblemSpec::Mlp(m) = &c.setup.problem else { panic!() };
        assert_eq!((m.n_hidden, m.batch), (8, None));
        assert_eq!(c.optimizers, vec![OptimizerKind::AdamW, OptimizerKind::Adafactor]);
        assert_eq!(c.setup.steps, 5000);
        assert_eq!(c.setup.schedule.warmup_steps, 100);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("1, 7").unwrap(), vec![1, 7]);
        assert!(parse_seeds("4..4").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn lr_scale_applies_to_default_only() {
        let d = Defaults {
            problem: ProblemKind::Quadratic,
            seeds: vec![0],
            lr_scale: 10.0,
        };
        let c = RunConfig::resolve(&Settings::default(), &d).unwrap();
        assert_eq!(c.setup.schedule.peak, 3.0);
        let mut s = Settings::default();
        s.set("lr", "0.1");
        assert_eq!(RunConfig::resolve(&s, &d).unwrap().setup.schedule.peak, 0.1);
    }
}
