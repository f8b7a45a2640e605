//! Flat `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::mesh::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    MultiSpace,
    MultiGrid,
    LShapeAdaptive,
    ComplexB,
    DirectBaseline,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MultiSpace => "multi_space",
            Experiment::MultiGrid => "multi_grid",
            Experiment::LShapeAdaptive => "lshape_adaptive",
            Experiment::ComplexB => "complex_b",
            Experiment::DirectBaseline => "direct_baseline",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "multi_space" => Experiment::MultiSpace,
            "multi_grid" => Experiment::MultiGrid,
            "lshape_adaptive" => Experiment::LShapeAdaptive,
            "complex_b" => Experiment::ComplexB,
            "direct_baseline" => Experiment::DirectBaseline,
            other => return Err(HarnessError::Config(format!("unknown experiment '{other}'"))),
        })
    }
}

/// Convection field of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convection {
    /// Constant `b = b_re + i b_im`.
    Constant,
    /// `b = (cos πx sin πy, −sin πx cos πy)`; `b_re`/`b_im` are ignored.
    Rotating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: Domain,
    /// Cells per unit length of the coarsest mesh, `H = 1/coarse_n`.
    pub coarse_n: usize,
    /// Levels of the multigrid ladder; adaptive iterations for
    /// `lshape_adaptive`.
    pub levels: usize,
    pub degrees: Vec<usize>,
    /// Meshes of a multi-space study, one degree ladder per entry.
    pub mesh_sizes: Vec<usize>,
    pub b_re: [f64; 2],
    pub b_im: [f64; 2],
    pub convection: Convection,
    pub target_index: usize,
    pub cluster_count: usize,
    pub quad_degree: Option<usize>,
    pub theta: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults of an experiment before any keys are applied.
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            domain: if experiment == Experiment::LShapeAdaptive { Domain::LShape } else { Domain::UnitSquare },
            coarse_n: 4,
            levels: if experiment == Experiment::LShapeAdaptive { 10 } else { 4 },
            degrees: if experiment == Experiment::MultiSpace { vec![1, 2, 3, 4] } else { vec![1] },
            mesh_sizes: vec![4],
            b_re: [1.0, 0.5],
            b_im: if experiment == Experiment::ComplexB { [2.0, -1.0] } else { [0.0, 0.0] },
            convection: Convection::Constant,
            target_index: 1,
            cluster_count: 1,
            quad_degree: None,
            theta: 0.4,
            seed: 0,
            output: None,
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.coarse_n as f64
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn to_lines(&self) -> Vec<String> {
        let list = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ");
        let mut out = vec![
            format!("experiment = {}", self.experiment),
            format!("domain = {}", if self.domain == Domain::LShape { "l_shape" } else { "unit_square" }),
            format!("coarse_n = {}", self.coarse_n),
            format!("levels = {}", self.levels),
            format!("degrees = {}", list(&self.degrees)),
            format!("mesh_sizes = {}", list(&self.mesh_sizes)),
            format!("b_re = {}, {}", self.b_re[0], self.b_re[1]),
            format!("b_im = {}, {}", self.b_im[0], self.b_im[1]),
            format!("convection = {}", if self.convection == Convection::Rotating { "rotating" } else { "constant" }),
            format!("target_index = {}", self.target_index),
            format!("cluster_count = {}", self.cluster_count),
            format!("theta = {}", self.theta),
            format!("seed = {}", self.seed),
        ];
        if self.experiment != Experiment::ComplexB && self.b_im != [0.0, 0.0] {
            out.push("override_b_im = true".into());
        }
        if let Some(q) = self.quad_degree {
            out.push(format!("quad_degree = {q}"));
        }
        if let Some(p) = &self.output {
            out.push(format!("output = {}", p.display()));
        }
        out
    }
}

fn bad(key: &str, value: &str, what: &str) -> HarnessError {
    HarnessError::Config(format!("{key} = '{value}': {what}"))
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.trim().parse().map_err(|_| bad(key, value, "not a number of the expected kind"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_pair(key: &str, value: &str) -> Result<[f64; 2], HarnessError> {
    match parse_list::<f64>(key, value)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(bad(key, value, "expected two reals")),
    }
}

/// `H` given as a decimal or as `1/n`.
fn parse_mesh_size(value: &str) -> Result<f64, HarnessError> {
    let v = value.trim();
    if let Some((num, den)) = v.split_once('/') {
        let num: f64 = parse_num("H", num)?;
        let den: f64 = parse_num("H", den)?;
        Ok(num / den)
    } else {
        parse_num("H", v)
    }
}

/// Parse and validate a configuration file's contents.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let key = k.trim().to_string();
        if let Some(prev) = seen.insert(key.clone(), lineno + 1) {
            return Err(HarnessError::Config(format!("line {}: duplicate key '{key}' (first on line {prev})", lineno + 1)));
        }
        pairs.push((key, v.trim().to_string()));
    }
    let experiment: Experiment = pairs
        .iter()
        .find(|(k, _)| k == "experiment")
        .ok_or_else(|| HarnessError::Config("missing key 'experiment'".into()))?
        .1
        .parse()?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    let mut h_value = None;
    let mut coarse_given = false;
    let mut b_im_given = false;
    let mut override_b_im = false;
    for (key, value) in &pairs {
        match key.as_str() {
            "experiment" => {}
            "domain" => {
                cfg.domain = match value.as_str() {
                    "unit_square" => Domain::UnitSquare,
                    "l_shape" => Domain::LShape,
                    _ => return Err(bad(key, value, "expected unit_square or l_shape")),
                }
            }
            "coarse_n" => {
                cfg.coarse_n = parse_num(key, value)?;
                coarse_given = true;
            }
            "H" => h_value = Some(parse_mesh_size(value)?),
            "levels" => cfg.levels = parse_num(key, value)?,
            "degrees" => cfg.degrees = parse_list(key, value)?,
            "mesh_sizes" => cfg.mesh_sizes = parse_list(key, value)?,
            "b_re" => cfg.b_re = parse_pair(key, value)?,
            "b_im" => {
                cfg.b_im = parse_pair(key, value)?;
                b_im_given = true;
            }
            "override_b_im" => override_b_im = parse_num(key, value)?,
            "convection" => {
                cfg.convection = match value.as_str() {
                    "constant" => Convection::Constant,
                    "rotating" => Convection::Rotating,
                    _ => return Err(bad(key, value, "expected constant or rotating")),
                }
            }
            "target_index" => cfg.target_index = parse_num(key, value)?,
            "cluster_count" => cfg.cluster_count = parse_num(key, value)?,
            "quad_degree" => cfg.quad_degree = Some(parse_num(key, value)?),
            "theta" => cfg.theta = parse_num(key, value)?,
            "seed" => cfg.seed = parse_num(key, value)?,
            "output" => cfg.output = Some(PathBuf::from(value)),
            other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
        }
    }
    if let Some(h) = h_value {
        let n = (1.0 / h).round();
        if !(h > 0.0) || n < 1.0 || ((1.0 / h) - n).abs() > 1e-9 * n {
            return Err(HarnessError::Config(format!("H = {h} is not the reciprocal of a positive integer")));
        }
        if coarse_given && cfg.coarse_n != n as usize {
            return Err(HarnessError::Config(format!("H = {h} contradicts coarse_n = {}", cfg.coarse_n)));
        }
        cfg.coarse_n = n as usize;
    }
    if !pairs.iter().any(|(k, _)| k == "mesh_sizes") {
        cfg.mesh_sizes = vec![cfg.coarse_n];
    }
    validate(&cfg, b_im_given && !override_b_im)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, b_im_explicit: bool) -> Result<(), HarnessError> {
    let fail = |m: String| Err(HarnessError::Config(m));
    if cfg.levels < 1 {
        return fail("levels must be at least 1".into());
    }
    if cfg.coarse_n < 1 || cfg.mesh_sizes.iter().any(|&n| n < 1) {
        return fail("mesh sizes must be positive".into());
    }
    if cfg.degrees.is_empty() {
        return fail("degrees must not be empty".into());
    }
    if let Some(&d) = cfg.degrees.iter().find(|&&d| !(1..=4).contains(&d)) {
        return fail(format!("degree {d} outside 1..=4"));
    }
    if cfg.target_index < 1 || cfg.cluster_count < 1 {
        return fail("target_index and cluster_count must be at least 1".into());
    }
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return fail(format!("theta {} outside (0, 1]", cfg.theta));
    }
    if cfg.quad_degree == Some(0) {
        return fail("quad_degree must be positive".into());
    }
    if b_im_explicit && cfg.experiment != Experiment::ComplexB && cfg.b_im != [0.0, 0.0] {
        return fail("nonzero b_im requires experiment = complex_b or override_b_im = true".into());
    }
    if matches!(cfg.experiment, Experiment::MultiGrid | Experiment::ComplexB) && cfg.degrees.len() != 1 {
        return fail("a mesh-refinement study takes exactly one degree".into());
    }
    if cfg.experiment == Experiment::LShapeAdaptive && cfg.degrees != [1] {
        return fail("lshape_adaptive runs on degree 1 only".into());
    }
    if cfg.b_re.iter().chain(&cfg.b_im).any(|v| !v.is_finite()) {
        return fail("convection vector must be finite".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let cfg = parse_config("# study\nexperiment = multi_grid  # trailing\n\nH = 1/4\nlevels = 5\nb_re = 1, 0.5\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::MultiGrid);
        assert_eq!(cfg.coarse_n, 4);
        assert_eq!(cfg.levels, 5);
        assert_eq!(cfg.degrees, vec![1]);
        assert_eq!(cfg.b_im, [0.0, 0.0]);
        assert_eq!(cfg.mesh_sizes, vec![4]);
    }

    #[test]
    fn complex_defaults() {
        let cfg = parse_config("experiment = complex_b").unwrap();
        assert_eq!(cfg.b_im, [2.0, -1.0]);
    }

    #[test]
    fn round_trips_through_lines() {
        let cfg = parse_config("experiment = multi_space\nmesh_sizes = 4, 8, 16\ncluster_count = 2\ntarget_index = 2\nquad_degree = 9").unwrap();
        let again = parse_config(&cfg.to_lines().join("\n")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_invalid_configs() {
        for text in [
            "levels = 3",
            "experiment = nonsense",
            "experiment = multi_grid\nlevels = 0",
            "experiment = multi_grid\nb_im = 1, 0",
            "experiment = multi_grid\nH = 0.3",
            "experiment = multi_grid\nH = 1/4\ncoarse_n = 8",
            "experiment = multi_space\ndegrees = 1, 5",
            "experiment = multi_grid\ntheta = 0",
            "experiment = multi_grid\ncolour = blue",
            "experiment = multi_grid\nlevels = 2\nlevels = 3",
            "experiment = multi_grid\nlevels",
            "experiment = multi_grid\ndegrees =",
        ] {
            assert!(matches!(parse_config(text), Err(HarnessError::Config(_))), "accepted: {text}");
        }
        assert!(parse_config("experiment = multi_grid\nb_im = 1, 0\noverride_b_im = true").is_ok());
    }
}
