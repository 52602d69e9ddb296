//! Benchmark systems and reach-set samplers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::christoffel::check_finite;
use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// `[lo, hi]ⁿ`.
    pub fn cube(dimension: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; dimension],
            upper: vec![hi; dimension],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidParameter("box corners must have equal, non-zero length".into()));
        }
        check_finite(&self.lower, "box corner")?;
        check_finite(&self.upper, "box corner")?;
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter("box corners are not ordered".into()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if u > l { rng.random_range(l..u) } else { l })
            .collect()
    }
}

/// Duffing oscillator `ẍ = −δ ẋ + α x − β x³ + γ cos(ω t)`, integrated with
/// classical RK4 over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuffingParams {
    pub alpha: f64,
    pub beta: f64,
    pub damping: f64,
    pub gamma: f64,
    pub omega: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            damping: 0.05,
            gamma: 0.4,
            omega: 1.3,
            horizon: 10.0,
            step: 0.01,
        }
    }
}

impl DuffingParams {
    fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.damping, self.gamma, self.omega, self.horizon, self.step];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("duffing parameters must be finite".into()));
        }
        if self.step <= 0.0 || self.horizon <= 0.0 {
            return Err(Error::InvalidParameter("duffing step and horizon must be positive".into()));
        }
        Ok(())
    }

    fn derivative(&self, t: f64, s: [f64; 2]) -> [f64; 2] {
        let [x, v] = s;
        [
            v,
            -self.damping * v + self.alpha * x - self.beta * x * x * x + self.gamma * (self.omega * t).cos(),
        ]
    }

    /// State at `t = horizon` from `(x, ẋ)` at `t = 0`. The step is shrunk
    /// so that an integer number of steps lands exactly on the horizon.
    pub fn flow(&self, initial: [f64; 2]) -> [f64; 2] {
        let steps = (self.horizon / self.step).round().max(1.0) as usize;
        let h = self.horizon / steps as f64;
        let mut s = initial;
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = self.derivative(t, s);
            let k2 = self.derivative(t + 0.5 * h, [s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = self.derivative(t + 0.5 * h, [s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = self.derivative(t + h, [s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s
    }
}

/// A user-supplied one-step transition map.
#[derive(Clone)]
pub struct CustomMap {
    pub name: String,
    pub map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    /// `f(x, y) = (sgn(x)(1 + x²), sgn(y)(1 + y²))` on `[−√2, √2]²`; the
    /// reach set is the four squares `{1 ≤ |x| ≤ 3, 1 ≤ |y| ≤ 3}`.
    FourSquares,
    /// Identity on `[−1, 1]²`.
    UnitSquare,
    /// Uniform samples of a closed star polygon.
    StarRegion { vertices: Vec<[f64; 2]> },
    Duffing(DuffingParams),
    #[serde(skip)]
    CustomMap(CustomMap),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSystem {
    #[serde(flatten)]
    pub kind: SystemKind,
    pub initial_set: Aabb,
}

/// `sgn` with `sgn(0) = +1`, so the origin maps to the corner `(1, 1)`.
fn signed_square_lift(v: f64) -> f64 {
    let magnitude = 1.0 + v * v;
    if v < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Five-pointed star inscribed in the unit circle, first tip on the +y axis.
pub fn default_star_vertices() -> Vec<[f64; 2]> {
    let inner = (72f64.to_radians()).cos() / (36f64.to_radians()).cos();
    (0..10)
        .map(|k| {
            let angle = (90.0 + 36.0 * k as f64).to_radians();
            let r = if k % 2 == 0 { 1.0 } else { inner };
            [r * angle.cos(), r * angle.sin()]
        })
        .collect()
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let scale = (b[0] - a[0]).abs() + (b[1] - a[1]).abs();
    if cross.abs() > 1e-12 * scale.max(1.0) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

/// Closed point-in-polygon test (even-odd rule, boundary included).
pub fn polygon_contains(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

impl BenchmarkSystem {
    pub fn four_squares() -> Self {
        let r = 2f64.sqrt();
        Self {
            kind: SystemKind::FourSquares,
            initial_set: Aabb::cube(2, -r, r),
        }
    }

    pub fn unit_square() -> Self {
        Self {
            kind: SystemKind::UnitSquare,
            initial_set: Aabb::cube(2, -1.0, 1.0),
        }
    }

    pub fn star_region() -> Self {
        Self::star_with_vertices(default_star_vertices())
    }

    /// Star region with an explicit vertex list; the initial set is the
    /// polygon's bounding box.
    pub fn star_with_vertices(vertices: Vec<[f64; 2]>) -> Self {
        let mut lower = vec![f64::INFINITY; 2];
        let mut upper = vec![f64::NEG_INFINITY; 2];
        for v in &vertices {
            for k in 0..2 {
                lower[k] = lower[k].min(v[k]);
                upper[k] = upper[k].max(v[k]);
            }
        }
        Self {
            kind: SystemKind::StarRegion { vertices },
            initial_set: Aabb { lower, upper },
        }
    }

    /// Duffing oscillator from `[−0.95, 1.05] × [−0.05, 0.05]`.
    pub fn duffing(params: DuffingParams) -> Self {
        Self {
            kind: SystemKind::Duffing(params),
            initial_set: Aabb {
                lower: vec![-0.95, -0.05],
                upper: vec![1.05, 0.05],
            },
        }
    }

    pub fn custom(name: impl Into<String>, initial_set: Aabb, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            kind: SystemKind::CustomMap(CustomMap {
                name: name.into(),
                map: Arc::new(map),
            }),
            initial_set,
        }
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            SystemKind::FourSquares => "four_squares",
            SystemKind::UnitSquare => "unit_square",
            SystemKind::StarRegion { .. } => "star_region",
            SystemKind::Duffing(_) => "duffing",
            SystemKind::CustomMap(c) => &c.name,
        }
    }

    pub fn dimension(&self) -> usize {
        self.initial_set.dimension()
    }

    /// Flat name → value view of the numeric parameters.
    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let SystemKind::Duffing(p) = &self.kind {
            for (k, v) in [
                ("alpha", p.alpha),
                ("beta", p.beta),
                ("damping", p.damping),
                ("gamma", p.gamma),
                ("omega", p.omega),
                ("horizon", p.horizon),
                ("step", p.step),
            ] {
                out.insert(k.to_string(), v);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.initial_set.validate()?;
        match &self.kind {
            SystemKind::FourSquares | SystemKind::UnitSquare => {
                if self.dimension() != 2 {
                    return Err(Error::InvalidParameter(format!("{} is two-dimensional", self.name())));
                }
            }
            SystemKind::StarRegion { vertices } => {
                if vertices.len() < 3 || self.dimension() != 2 {
                    return Err(Error::InvalidParameter("star region needs ≥ 3 planar vertices".into()));
                }
            }
            SystemKind::Duffing(p) => {
                p.validate()?;
                if self.dimension() != 2 {
                    return Err(Error::InvalidParameter("duffing state is two-dimensional".into()));
                }
            }
            SystemKind::CustomMap(_) => {}
        }
        Ok(())
    }

    /// One-step image of an initial point.
    pub fn transition(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let image = match &self.kind {
            SystemKind::FourSquares => x.iter().map(|&v| signed_square_lift(v)).collect(),
            SystemKind::UnitSquare | SystemKind::StarRegion { .. } => x.to_vec(),
            SystemKind::Duffing(p) => p.flow([x[0], x[1]]).to_vec(),
            SystemKind::CustomMap(c) => (c.map)(x),
        };
        if image.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowUp { initial: x.to_vec() });
        }
        Ok(image)
    }

    pub fn has_membership_oracle(&self) -> bool {
        matches!(
            self.kind,
            SystemKind::FourSquares | SystemKind::UnitSquare | SystemKind::StarRegion { .. }
        )
    }

    /// Exact indicator of the reach set (closed), for systems that have one.
    pub fn true_membership(&self, x: &[f64]) -> Result<bool> {
        if !self.has_membership_oracle() {
            return Err(Error::UnsupportedOracle {
                system: self.name().to_string(),
            });
        }
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
        }
        Ok(match &self.kind {
            SystemKind::FourSquares => x.iter().all(|v| (1.0..=3.0).contains(&v.abs())),
            SystemKind::UnitSquare => x.iter().all(|v| (-1.0..=1.0).contains(v)),
            SystemKind::StarRegion { vertices } => polygon_contains(vertices, [x[0], x[1]]),
            _ => unreachable!(),
        })
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match &self.kind {
            SystemKind::StarRegion { vertices } => {
                for _ in 0..MAX_REJECTIONS {
                    let p = self.initial_set.sample(rng);
                    if polygon_contains(vertices, [p[0], p[1]]) {
                        return Ok(p);
                    }
                }
                Err(Error::RejectionExhausted { attempts: MAX_REJECTIONS })
            }
            _ => Ok(self.initial_set.sample(rng)),
        }
    }

    /// `count` i.i.d. reach-set samples: uniform initial points mapped one
    /// step through the dynamics. Star regions are sampled uniformly by
    /// rejection from their bounding box.
    pub fn sample_reach_set(&self, count: usize, seed: u64) -> Result<LabeledDataset> {
        self.validate()?;
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial: Vec<Vec<f64>> = (0..count)
            .map(|_| self.draw_initial(&mut rng))
            .collect::<Result<_>>()?;
        let points = initial
            .par_iter()
            .map(|x| self.transition(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledDataset {
            labels: vec![true; points.len()],
            points,
            provenance: Provenance {
                system: self.name().to_string(),
                parameters: self.parameters(),
                seed,
                count,
                outlier_fraction: None,
                outlier_box: None,
                outlier_seed: None,
            },
        })
    }
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub count: usize,
    pub outlier_fraction: Option<f64>,
    pub outlier_box: Option<Aabb>,
    pub outlier_seed: Option<u64>,
}

/// Points with inlier (`true`) / outlier (`false`) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| !**l).count()
    }

    /// Replaces `⌊fraction · count⌋` randomly chosen points with uniform
    /// draws from `outlier_box`. For systems with a closed-form reach set
    /// the draws are rejected until they fall outside it.
    pub fn inject_outliers(
        &self,
        system: &BenchmarkSystem,
        fraction: f64,
        outlier_box: &Aabb,
        seed: u64,
    ) -> Result<LabeledDataset> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("outlier fraction must lie in (0, 1), got {fraction}")));
        }
        outlier_box.validate()?;
        if let Some(first) = self.points.first() {
            if first.len() != outlier_box.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: outlier_box.dimension(),
                });
            }
        }
        let k = (fraction * self.len() as f64 + 1e-9).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.provenance.outlier_fraction = Some(fraction);
        out.provenance.outlier_box = Some(outlier_box.clone());
        out.provenance.outlier_seed = Some(seed);
        if k == 0 {
            return Ok(out);
        }
        let mut chosen = rand::seq::index::sample(&mut rng, self.len(), k).into_vec();
        chosen.sort_unstable();
        let check = system.has_membership_oracle();
        if !check {
            log::warn!("{} has no closed-form reach set; outliers are not rejection-checked", system.name());
        }
        for i in chosen {
            let mut attempts = 0;
            let p = loop {
                if attempts == MAX_REJECTIONS {
                    return Err(Error::RejectionExhausted { attempts });
                }
                attempts += 1;
                let p = outlier_box.sample(&mut rng);
                if !check || !system.true_membership(&p)? {
                    break p;
                }
            };
            out.points[i] = p;
            out.labels[i] = false;
        }
        Ok(out)
    }

    /// Writes `path` as CSV (`x1,…,xn,label`) and a JSON manifest next to it
    /// (see [`manifest_path`]).
    pub fn write(&self, path: &Path) -> Result<()> {
        write_points_csv(path, &self.points, Some(&self.labels))?;
        fs::write(manifest_path(path), serde_json::to_string_pretty(&self.provenance)? + "\n")?;
        Ok(())
    }
}

/// `data.csv` → `data.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

pub fn write_points_csv(path: &Path, points: &[Vec<f64>], labels: Option<&[bool]>) -> Result<()> {
    let n = points.first().map_or(0, Vec::len);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writer.write_record(&header)?;
    for (i, p) in points.iter().enumerate() {
        let mut record: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            record.push(if l[i] { "1".into() } else { "0".into() });
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a CSV with header `x1,…,xn[,label]`.
pub fn read_points_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Option<Vec<bool>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let n = header.len() - usize::from(has_label);
    if n == 0 {
        return Err(Error::Malformed(format!("{}: no coordinate columns", path.display())));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Malformed(format!("{}: row {}: bad number `{s}`", path.display(), row + 1)))
        };
        let p = record.iter().take(n).map(parse).collect::<Result<Vec<_>>>()?;
        if has_label {
            let raw = record.get(n).unwrap_or("").trim();
            labels.push(match raw {
                "1" | "true" | "inlier" => true,
                "0" | "false" | "outlier" => false,
                _ => {
                    return Err(Error::Malformed(format!(
                        "{}: row {}: bad label `{raw}`",
                        path.display(),
                        row + 1
                    )))
                }
            });
        }
        points.push(p);
    }
    Ok((points, has_label.then_some(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_squares_examples() {
        let sys = BenchmarkSystem::four_squares();
        assert_eq!(sys.transition(&[0.5, -0.5]).unwrap(), vec![1.25, -1.25]);
        assert_eq!(sys.transition(&[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        let corner = 2f64.sqrt();
        let img = sys.transition(&[corner, -corner]).unwrap();
        assert!((img[0] - 3.0).abs() < 1e-15 && (img[1] + 3.0).abs() < 1e-15);
        assert!(sys.true_membership(&[2.0, 2.0]).unwrap());
        assert!(!sys.true_membership(&[0.0, 0.0]).unwrap());
        assert!(sys.true_membership(&[1.0, 1.0]).unwrap());
        assert!(sys.true_membership(&[-3.0, 1.0]).unwrap());
        assert!(!sys.true_membership(&[3.1, 2.0]).unwrap());
    }

    #[test]
    fn four_squares_samples_are_inliers() {
        let sys = BenchmarkSystem::four_squares();
        let data = sys.sample_reach_set(5000, 3).unwrap();
        assert!(data.points.iter().all(|p| sys.true_membership(p).unwrap()));
        // Every quadrant is populated.
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            assert!(data.points.iter().any(|p| p[0] * sx > 0.0 && p[1] * sy > 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let sys = BenchmarkSystem::four_squares();
        let a = sys.sample_reach_set(100, 9).unwrap();
        let b = sys.sample_reach_set(100, 9).unwrap();
        assert_eq!(a, b);
        let c = sys.sample_reach_set(100, 10).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn duffing_oracle_unsupported() {
        let sys = BenchmarkSystem::duffing(DuffingParams::default());
        assert!(matches!(sys.true_membership(&[0.0, 0.0]), Err(Error::UnsupportedOracle { .. })));
    }

    #[test]
    fn duffing_samples_finite() {
        let sys = BenchmarkSystem::duffing(DuffingParams::default());
        let data = sys.sample_reach_set(200, 1).unwrap();
        assert!(data.points.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(sys.parameters()["omega"], 1.3);
    }

    #[test]
    fn duffing_blow_up_is_reported() {
        let params = DuffingParams {
            beta: -1.0,
            alpha: 10.0,
            horizon: 50.0,
            step: 0.1,
            ..DuffingParams::default()
        };
        let sys = BenchmarkSystem::duffing(params);
        match sys.transition(&[1.0, 0.0]) {
            Err(Error::IntegrationBlowUp { initial }) => assert_eq!(initial, vec![1.0, 0.0]),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn duffing_rk4_convergence_order() {
        let base = DuffingParams {
            horizon: 5.0,
            ..DuffingParams::default()
        };
        let at = |step: f64, s: [f64; 2]| DuffingParams { step, ..base }.flow(s);
        for i in 0..10 {
            let s = [-0.95 + 0.2 * i as f64, -0.05 + 0.01 * i as f64];
            let (a, b, c) = (at(0.1, s), at(0.05, s), at(0.025, s));
            let coarse = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let fine = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
            let ratio = coarse / fine;
            assert!((12.0..20.0).contains(&ratio), "point {i}: ratio {ratio}");
        }
    }

    #[test]
    fn star_geometry() {
        let sys = BenchmarkSystem::star_region();
        assert!(sys.true_membership(&[0.0, 0.0]).unwrap());
        assert!(sys.true_membership(&[0.0, 1.0]).unwrap());
        assert!(sys.true_membership(&[0.0, 0.9]).unwrap());
        // Notch between the top two tips.
        let notch = (90.0f64 + 36.0).to_radians();
        assert!(!sys.true_membership(&[0.9 * notch.cos(), 0.9 * notch.sin()]).unwrap());
        assert!(!sys.true_membership(&[1.0, 1.0]).unwrap());
        let data = sys.sample_reach_set(500, 2).unwrap();
        assert!(data.points.iter().all(|p| sys.true_membership(p).unwrap()));
    }

    #[test]
    fn unit_square_identity() {
        let sys = BenchmarkSystem::unit_square();
        let data = sys.sample_reach_set(50, 0).unwrap();
        assert!(data.points.iter().all(|p| p.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn custom_map() {
        let sys = BenchmarkSystem::custom("shift", Aabb::cube(1, 0.0, 1.0), |x| vec![x[0] + 10.0]);
        let data = sys.sample_reach_set(20, 0).unwrap();
        assert!(data.points.iter().all(|p| (10.0..=11.0).contains(&p[0])));
        assert!(sys.true_membership(&[10.5]).is_err());
    }

    #[test]
    fn outlier_injection_counts() {
        let sys = BenchmarkSystem::four_squares();
        let data = sys.sample_reach_set(1500, 1).unwrap();
        let box4 = Aabb::cube(2, -4.0, 4.0);
        let dirty = data.inject_outliers(&sys, 0.1, &box4, 2).unwrap();
        assert_eq!(dirty.outlier_count(), 150);
        for (p, l) in dirty.points.iter().zip(&dirty.labels) {
            assert_eq!(sys.true_membership(p).unwrap(), *l);
        }
        let same = data.inject_outliers(&sys, 0.0005, &box4, 2).unwrap();
        assert_eq!(same.points, data.points);
        assert_eq!(same.provenance.outlier_fraction, Some(0.0005));
    }

    #[test]
    fn outlier_rejection_exhausts_inside_reach_set() {
        let sys = BenchmarkSystem::four_squares();
        let data = sys.sample_reach_set(10, 1).unwrap();
        let inside = Aabb::cube(2, 1.5, 2.5);
        assert!(matches!(
            data.inject_outliers(&sys, 0.5, &inside, 0),
            Err(Error::RejectionExhausted { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let sys = BenchmarkSystem::four_squares();
        let data = sys
            .sample_reach_set(30, 5)
            .unwrap()
            .inject_outliers(&sys, 0.2, &Aabb::cube(2, -4.0, 4.0), 6)
            .unwrap();
        data.write(&path).unwrap();
        let (points, labels) = read_points_csv(&path).unwrap();
        assert_eq!(points, data.points);
        assert_eq!(labels.unwrap(), data.labels);
        let manifest: Provenance =
            serde_json::from_str(&fs::read_to_string(manifest_path(&path)).unwrap()).unwrap();
        assert_eq!(manifest, data.provenance);
        let header = fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("x1,x2,label\n"));
    }

    #[test]
    fn system_serde() {
        let sys = BenchmarkSystem::duffing(DuffingParams::default());
        let text = serde_json::to_string(&sys).unwrap();
        assert!(text.contains("\"kind\":\"duffing\""));
        let back: BenchmarkSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back.parameters(), sys.parameters());
        let fs: BenchmarkSystem =
            serde_json::from_str(r#"{"kind":"four_squares","initial_set":{"lower":[-1,-1],"upper":[1,1]}}"#).unwrap();
        assert_eq!(fs.name(), "four_squares");
    }
}
