//! Reproducible observation streams and CSV ingestion.
//!
//! Random streams use ChaCha8 seeded from a 64-bit seed; replicate `r` of a
//! spec uses seed `seed ^ r`, so parallel replicates never share a stream.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scaled};
use crate::loss::{sigmoid, Label, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Wellspecified,
    Alternating,
    FixedReplay { labels: Vec<Label> },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLaw {
    UniformSphere { radius: f64 },
    UniformCube { half_width: f64 },
    FixedList { points: Vec<Vec<f64>> },
}

impl Default for FeatureLaw {
    fn default() -> Self {
        FeatureLaw::UniformSphere { radius: 1.0 }
    }
}

impl FeatureLaw {
    /// Almost-sure bound on `||x||` under this law.
    pub fn radius_bound(&self, d: usize) -> f64 {
        match self {
            FeatureLaw::UniformSphere { radius } => *radius,
            FeatureLaw::UniformCube { half_width } => half_width * (d as f64).sqrt(),
            FeatureLaw::FixedList { points } => points.iter().map(|p| norm(p)).fold(0.0, f64::max),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, d: usize, t: usize) -> Vec<f64> {
        match self {
            FeatureLaw::UniformSphere { radius } => loop {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&g);
                if n > 0.0 {
                    break scaled(&g, radius / n);
                }
            },
            FeatureLaw::UniformCube { half_width } => {
                (0..d).map(|_| rng.random_range(-half_width..=*half_width)).collect()
            }
            FeatureLaw::FixedList { points } => points[t % points.len()].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub n: usize,
    pub d: usize,
    pub scheme: Scheme,
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default)]
    pub feature_law: FeatureLaw,
    #[serde(default)]
    pub seed: u64,
}

impl StreamSpec {
    /// Default experimental setup: uniform unit sphere, well-specified labels.
    pub fn wellspecified(n: usize, theta_true: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            d: theta_true.len(),
            scheme: Scheme::Wellspecified,
            theta_true: Some(theta_true),
            feature_law: FeatureLaw::default(),
            seed,
        }
    }

    pub fn alternating(n: usize, d: usize, radius: f64) -> Self {
        Self {
            n,
            d,
            scheme: Scheme::Alternating,
            theta_true: None,
            feature_law: FeatureLaw::UniformSphere { radius },
            seed: 0,
        }
    }

    /// Copy of this spec for replicate `r`.
    pub fn replicate(&self, r: u64) -> Self {
        Self { seed: self.seed ^ r, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 || self.d == 0 {
            return bad(format!("stream needs n >= 1 and d >= 1 (n = {}, d = {})", self.n, self.d));
        }
        match (&self.scheme, &self.theta_true) {
            (Scheme::Wellspecified, None) => return bad("wellspecified stream requires theta_true".into()),
            (Scheme::Wellspecified, Some(t)) if t.len() != self.d => {
                return bad(format!("theta_true has dimension {}, expected {}", t.len(), self.d))
            }
            (Scheme::Wellspecified, _) => {}
            (_, Some(_)) => return bad("theta_true is only meaningful for wellspecified streams".into()),
            _ => {}
        }
        match &self.feature_law {
            FeatureLaw::UniformSphere { radius } if !(*radius > 0.0) => {
                return bad("sphere radius must be positive".into())
            }
            FeatureLaw::UniformCube { half_width } if !(*half_width > 0.0) => {
                return bad("cube half-width must be positive".into())
            }
            FeatureLaw::FixedList { points } => {
                if points.is_empty() && !matches!(self.scheme, Scheme::Csv { .. }) {
                    return bad("fixed feature list is empty".into());
                }
                if let Some(p) = points.iter().find(|p| p.len() != self.d) {
                    return bad(format!("fixed point has dimension {}, expected {}", p.len(), self.d));
                }
            }
            _ => {}
        }
        match &self.scheme {
            Scheme::Alternating if matches!(self.feature_law, FeatureLaw::FixedList { .. }) => {
                bad("alternating stream needs a sphere or cube feature law".into())
            }
            Scheme::FixedReplay { labels } => {
                if labels.is_empty() {
                    return bad("fixed_replay needs at least one label".into());
                }
                if !matches!(self.feature_law, FeatureLaw::FixedList { .. }) {
                    return bad("fixed_replay needs a fixed_list feature law".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub spec: StreamSpec,
    pub observations: Vec<Observation>,
    /// Realized `max_t ||x_t||`.
    pub d_x: f64,
}

impl Stream {
    fn from_observations(spec: StreamSpec, observations: Vec<Observation>) -> Self {
        let d_x = observations.iter().map(|o| norm(&o.x)).fold(0.0, f64::max);
        Self { spec, observations, d_x }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }
}

/// Builds the stream described by `spec`, dispatching on its scheme.
pub fn generate(spec: &StreamSpec) -> Result<Stream> {
    match &spec.scheme {
        Scheme::Wellspecified => gen_wellspecified(spec),
        Scheme::Alternating | Scheme::FixedReplay { .. } => gen_adversarial(spec),
        Scheme::Csv { path } => {
            let mut s = load_csv(path)?;
            if s.dim() != spec.d {
                return Err(Error::InvalidParameter(format!("csv has d = {}, config says {}", s.dim(), spec.d)));
            }
            s.observations.truncate(spec.n);
            Ok(Stream::from_observations(spec.clone(), s.observations))
        }
    }
}

/// i.i.d. features with labels drawn from the logistic model at `theta_true`.
pub fn gen_wellspecified(spec: &StreamSpec) -> Result<Stream> {
    spec.validate()?;
    let theta_true = match (&spec.scheme, &spec.theta_true) {
        (Scheme::Wellspecified, Some(t)) => t,
        _ => return Err(Error::InvalidParameter("gen_wellspecified needs a wellspecified spec".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let observations = (0..spec.n)
        .map(|t| {
            let x = spec.feature_law.sample(&mut rng, spec.d, t);
            let p = sigmoid(dot(theta_true, &x));
            let y = if rng.random::<f64>() < p { Label::Pos } else { Label::Neg };
            Observation { x, y }
        })
        .collect();
    Ok(Stream::from_observations(spec.clone(), observations))
}

/// Deterministic streams for adversarial-sequence checks.
///
/// `alternating`: features cycle through `+e_1..+e_d, -e_1..-e_d` scaled to the
/// law's radius, labels `y_t = (-1)^t`. `fixed_replay`: cycles through the
/// fixed points and the given labels.
pub fn gen_adversarial(spec: &StreamSpec) -> Result<Stream> {
    spec.validate()?;
    let observations = match &spec.scheme {
        Scheme::Alternating => {
            let scale = match spec.feature_law {
                FeatureLaw::UniformSphere { radius } => radius,
                FeatureLaw::UniformCube { half_width } => half_width,
                FeatureLaw::FixedList { .. } => unreachable!("rejected by validate"),
            };
            (1..=spec.n)
                .map(|t| {
                    let k = (t - 1) % (2 * spec.d);
                    let mut x = vec![0.0; spec.d];
                    x[k % spec.d] = if k < spec.d { scale } else { -scale };
                    let y = if t % 2 == 0 { Label::Pos } else { Label::Neg };
                    Observation { x, y }
                })
                .collect()
        }
        Scheme::FixedReplay { labels } => {
            let points = match &spec.feature_law {
                FeatureLaw::FixedList { points } => points,
                _ => unreachable!("rejected by validate"),
            };
            (0..spec.n)
                .map(|t| Observation { x: points[t % points.len()].clone(), y: labels[t % labels.len()] })
                .collect()
        }
        _ => return Err(Error::InvalidParameter("gen_adversarial needs alternating or fixed_replay".into())),
    };
    Ok(Stream::from_observations(spec.clone(), observations))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Stream> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut s = read_csv(file)?;
    s.spec.scheme = Scheme::Csv { path: path.to_path_buf() };
    Ok(s)
}

/// Parses `y,x1,...,xd` rows. Labels may be `-1/1` or `0/1`.
pub fn read_csv<R: Read>(reader: R) -> Result<Stream> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    if headers.is_empty() || &headers[0] != "y" || d == 0 {
        return Err(Error::Parse { line: 1, message: "header must be y,x1,...,xd".into() });
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(Error::Parse { line: 1, message: format!("unexpected column {h:?}") });
        }
    }
    let mut observations = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fail = |message: String| Error::Parse { line, message };
        if rec.len() != d + 1 {
            return Err(fail(format!("expected {} fields, got {}", d + 1, rec.len())));
        }
        let y = match rec[0].parse::<f64>().map_err(|e| fail(e.to_string()))? {
            1.0 => Label::Pos,
            v if v == -1.0 || v == 0.0 => Label::Neg,
            v => return Err(fail(format!("label must be -1/1 or 0/1, got {v}"))),
        };
        let x = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| fail(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if !crate::linalg::all_finite(&x) {
            return Err(fail("non-finite feature".into()));
        }
        observations.push(Observation { x, y });
    }
    if observations.is_empty() {
        return Err(Error::Parse { line: 1, message: "no observations".into() });
    }
    let spec = StreamSpec {
        n: observations.len(),
        d,
        scheme: Scheme::Csv { path: PathBuf::new() },
        theta_true: None,
        feature_law: FeatureLaw::FixedList { points: Vec::new() },
        seed: 0,
    };
    Ok(Stream::from_observations(spec, observations))
}

/// Writes a stream in the format [`read_csv`] accepts; floats use the
/// shortest round-tripping representation.
pub fn write_csv<W: Write>(stream: &Stream, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=stream.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for o in &stream.observations {
        let mut row = vec![(i8::from(o.y)).to_string()];
        row.extend(o.x.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
