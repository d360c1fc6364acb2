//! Procedural test environments and synthetic point clouds.
//!
//! A [`World`] is a flat (optionally undulating) ground plane populated with
//! axis-aligned boxes standing in for trees, bushes, walls, buildings and rocks.
//! [`sample_point_cloud`] draws a Poisson number of points from every box volume
//! and from the ground surface.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WORLD_FORMAT: &str = "world.v1";
pub const MIN_EXTENT: f64 = 10.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world extent {x} x {y} m is below the {MIN_EXTENT} m minimum")]
    ExtentTooSmall { x: f64, y: f64 },
    #[error("noise sigma must be non-negative and finite, got {0}")]
    BadNoise(f64),
    #[error("point cloud contains a non-finite coordinate at index {0}")]
    NonFinitePoint(usize),
    #[error("unsupported world format {0:?}")]
    Format(String),
    #[error("malformed point cloud text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Urban,
    Forest,
    Mixed,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Urban, Scenario::Forest, Scenario::Mixed];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Urban => "urban",
            Scenario::Forest => "forest",
            Scenario::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "urban" => Ok(Scenario::Urban),
            "forest" => Ok(Scenario::Forest),
            "mixed" => Ok(Scenario::Mixed),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Tree,
    Bush,
    Wall,
    Building,
    Rock,
}

impl ObjectKind {
    pub fn is_structural(&self) -> bool {
        matches!(self, ObjectKind::Wall | ObjectKind::Building)
    }

    pub fn is_vegetation(&self) -> bool {
        matches!(self, ObjectKind::Tree | ObjectKind::Bush)
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Footprint {
    pub fn centered(cx: f64, cy: f64, size_x: f64, size_y: f64) -> Self {
        Self {
            x_min: cx - size_x / 2.0,
            x_max: cx + size_x / 2.0,
            y_min: cy - size_y / 2.0,
            y_max: cy + size_y / 2.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    fn grown(&self, margin: f64) -> Self {
        Self {
            x_min: self.x_min - margin,
            x_max: self.x_max + margin,
            y_min: self.y_min - margin,
            y_max: self.y_max + margin,
        }
    }

    fn overlaps(&self, other: &Footprint) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub kind: ObjectKind,
    pub center: [f64; 2],
    pub footprint: Footprint,
    /// Box height above the ground plane, meters.
    pub height: f64,
    /// Points per cubic meter of box volume.
    pub point_density: f64,
}

impl PlacedObject {
    pub fn volume(&self) -> f64 {
        self.footprint.area() * self.height
    }

    /// Whether `p` lies inside the object box, which starts at `base_z`.
    pub fn contains(&self, p: [f64; 3], base_z: f64) -> bool {
        self.footprint.contains(p[0], p[1]) && p[2] >= base_z && p[2] <= base_z + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub scenario: Scenario,
    pub extent_x: f64,
    pub extent_y: f64,
    /// Elevation of the ground plane and of every object base.
    pub ground_z: f64,
    /// Amplitude of the sinusoidal ground undulation, meters.
    pub terrain_amplitude: f64,
    pub seed: u64,
    pub objects: Vec<PlacedObject>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDocument {
    format: String,
    #[serde(flatten)]
    world: World,
}

impl World {
    /// A world with no objects and flat ground.
    pub fn empty(extent_x: f64, extent_y: f64) -> Self {
        Self {
            scenario: Scenario::Mixed,
            extent_x,
            extent_y,
            ground_z: 0.0,
            terrain_amplitude: 0.0,
            seed: 0,
            objects: Vec::new(),
        }
    }

    /// Ground elevation at `(x, y)`.
    pub fn ground_height(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::TAU;
        self.ground_z
            + self.terrain_amplitude * (TAU * x / 7.3).sin() * (TAU * y / 9.1).cos()
    }

    pub fn to_json(&self) -> Result<String, WorldError> {
        let doc = WorldDocument {
            format: WORLD_FORMAT.to_string(),
            world: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let doc: WorldDocument = serde_json::from_str(text)?;
        if doc.format != WORLD_FORMAT {
            return Err(WorldError::Format(doc.format));
        }
        Ok(doc.world)
    }

    /// Fraction of objects that are walls or buildings, and of trees or bushes.
    pub fn class_fractions(&self) -> (f64, f64) {
        let n = self.objects.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        let s = self.objects.iter().filter(|o| o.kind.is_structural()).count();
        let v = self.objects.iter().filter(|o| o.kind.is_vegetation()).count();
        (s as f64 / n as f64, v as f64 / n as f64)
    }
}

/// Catalogue entry: size ranges in meters and sampling density.
struct Template {
    size: (f64, f64),
    thickness: Option<(f64, f64)>,
    height: (f64, f64),
    density: f64,
}

fn template(kind: ObjectKind) -> Template {
    match kind {
        ObjectKind::Tree => Template {
            size: (1.0, 2.5),
            thickness: None,
            height: (2.5, 6.0),
            density: 12.0,
        },
        ObjectKind::Bush => Template {
            size: (2.0, 5.0),
            thickness: None,
            height: (0.6, 1.2),
            density: 30.0,
        },
        ObjectKind::Wall => Template {
            size: (3.0, 8.0),
            thickness: Some((0.3, 0.5)),
            height: (2.0, 3.0),
            density: 30.0,
        },
        ObjectKind::Building => Template {
            size: (4.0, 9.0),
            thickness: None,
            height: (3.0, 8.0),
            density: 8.0,
        },
        ObjectKind::Rock => Template {
            size: (0.5, 1.5),
            thickness: None,
            height: (0.2, 0.5),
            density: 30.0,
        },
    }
}

/// Object mix per scenario, as (kind, share of all objects).
fn mix(scenario: Scenario) -> &'static [(ObjectKind, f64)] {
    match scenario {
        Scenario::Urban => &[
            (ObjectKind::Wall, 0.50),
            (ObjectKind::Building, 0.22),
            (ObjectKind::Bush, 0.22),
            (ObjectKind::Tree, 0.03),
            (ObjectKind::Rock, 0.03),
        ],
        Scenario::Forest => &[
            (ObjectKind::Tree, 0.25),
            (ObjectKind::Bush, 0.55),
            (ObjectKind::Rock, 0.10),
            (ObjectKind::Wall, 0.10),
        ],
        Scenario::Mixed => &[
            (ObjectKind::Wall, 0.30),
            (ObjectKind::Building, 0.12),
            (ObjectKind::Tree, 0.10),
            (ObjectKind::Bush, 0.40),
            (ObjectKind::Rock, 0.08),
        ],
    }
}

const PLACEMENT_GAP: f64 = 1.2;
const BORDER_MARGIN: f64 = 1.0;
const PLACEMENT_TRIES: usize = 60;
const AREA_PER_OBJECT: f64 = 60.0;

fn sample_object(kind: ObjectKind, world: (f64, f64), rng: &mut ChaCha8Rng) -> PlacedObject {
    let t = template(kind);
    let (size_x, size_y) = match t.thickness {
        Some(th) => {
            let length = rng.random_range(t.size.0..=t.size.1);
            let thick = rng.random_range(th.0..=th.1);
            if rng.random_bool(0.5) {
                (length, thick)
            } else {
                (thick, length)
            }
        }
        None => (
            rng.random_range(t.size.0..=t.size.1),
            rng.random_range(t.size.0..=t.size.1),
        ),
    };
    let lo_x = BORDER_MARGIN + size_x / 2.0;
    let lo_y = BORDER_MARGIN + size_y / 2.0;
    let cx = rng.random_range(lo_x..=(world.0 - lo_x).max(lo_x));
    let cy = rng.random_range(lo_y..=(world.1 - lo_y).max(lo_y));
    PlacedObject {
        kind,
        center: [cx, cy],
        footprint: Footprint::centered(cx, cy, size_x, size_y),
        height: rng.random_range(t.height.0..=t.height.1),
        point_density: t.density,
    }
}

fn mix_satisfied(scenario: Scenario, objects: &[PlacedObject]) -> bool {
    let n = objects.len() as f64;
    if n == 0.0 {
        return true;
    }
    let s = objects.iter().filter(|o| o.kind.is_structural()).count() as f64 / n;
    let v = objects.iter().filter(|o| o.kind.is_vegetation()).count() as f64 / n;
    match scenario {
        Scenario::Urban => s >= 0.7,
        Scenario::Forest => v >= 0.7,
        Scenario::Mixed => s <= 0.6 && v <= 0.6,
    }
}

/// Drops the most recently placed object that works against the scenario mix.
fn trim_towards_mix(scenario: Scenario, objects: &mut Vec<PlacedObject>) {
    let n = objects.len() as f64;
    let s = objects.iter().filter(|o| o.kind.is_structural()).count() as f64 / n;
    let victim = |o: &PlacedObject| match scenario {
        Scenario::Urban => !o.kind.is_structural(),
        Scenario::Forest => !o.kind.is_vegetation(),
        Scenario::Mixed => {
            if s > 0.6 {
                o.kind.is_structural()
            } else {
                o.kind.is_vegetation()
            }
        }
    };
    if let Some(k) = objects.iter().rposition(victim) {
        objects.remove(k);
    } else {
        objects.pop();
    }
}

/// Builds a deterministic scenario world of `extent_x x extent_y` meters.
pub fn generate_world(
    scenario: Scenario,
    extent_x: f64,
    extent_y: f64,
    seed: u64,
) -> Result<World, WorldError> {
    if !(extent_x >= MIN_EXTENT && extent_y >= MIN_EXTENT) {
        return Err(WorldError::ExtentTooSmall {
            x: extent_x,
            y: extent_y,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = ((extent_x * extent_y) / AREA_PER_OBJECT).round().max(4.0) as usize;
    let mut planned = Vec::with_capacity(total);
    for &(kind, share) in mix(scenario) {
        let count = (share * total as f64).round() as usize;
        planned.extend(std::iter::repeat_n(kind, count));
    }
    planned.shuffle(&mut rng);

    let mut objects: Vec<PlacedObject> = Vec::with_capacity(planned.len());
    for kind in planned {
        for _ in 0..PLACEMENT_TRIES {
            let candidate = sample_object(kind, (extent_x, extent_y), &mut rng);
            let fp = candidate.footprint;
            let inside = fp.x_min >= 0.0
                && fp.y_min >= 0.0
                && fp.x_max <= extent_x
                && fp.y_max <= extent_y;
            let grown = fp.grown(PLACEMENT_GAP);
            if inside && objects.iter().all(|o| !o.footprint.overlaps(&grown)) {
                objects.push(candidate);
                break;
            }
        }
    }
    while !mix_satisfied(scenario, &objects) {
        trim_towards_mix(scenario, &mut objects);
    }
    let terrain_amplitude = match scenario {
        Scenario::Urban => 0.0,
        Scenario::Forest | Scenario::Mixed => 0.08,
    };
    Ok(World {
        scenario,
        extent_x,
        extent_y,
        ground_z: 0.0,
        terrain_amplitude,
        seed,
        objects,
    })
}

/// Unordered 3D points in meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, WorldError> {
        if let Some(k) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(WorldError::NonFinitePoint(k));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x y z` per line.
    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        out
    }

    pub fn from_xyz(text: &str) -> Result<Self, WorldError> {
        let mut points = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            match vals {
                Ok(v) if v.len() == 3 => points.push([v[0], v[1], v[2]]),
                Ok(v) => {
                    return Err(WorldError::Parse {
                        line: k + 1,
                        reason: format!("expected 3 coordinates, found {}", v.len()),
                    })
                }
                Err(e) => {
                    return Err(WorldError::Parse {
                        line: k + 1,
                        reason: e.to_string(),
                    })
                }
            }
        }
        Self::new(points)
    }
}

/// Which part of the world produced a sampled point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    Ground,
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudParams {
    pub noise_sigma: f64,
    /// Ground samples per square meter.
    pub ground_density: f64,
}

impl Default for CloudParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.02,
            ground_density: 4.0,
        }
    }
}

/// Samples a cloud with the default ground density.
pub fn sample_point_cloud(
    world: &World,
    noise_sigma: f64,
    seed: u64,
) -> Result<PointCloud, WorldError> {
    let params = CloudParams {
        noise_sigma,
        ..CloudParams::default()
    };
    Ok(sample_labeled_point_cloud(world, &params, seed)?.0)
}

/// Samples a cloud together with the source of every point. Object points come
/// first, in object order, followed by ground points.
pub fn sample_labeled_point_cloud(
    world: &World,
    params: &CloudParams,
    seed: u64,
) -> Result<(PointCloud, Vec<PointSource>), WorldError> {
    if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(WorldError::BadNoise(params.noise_sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c10d_0000_0000);
    let noise = Normal::new(0.0, params.noise_sigma).map_err(|_| WorldError::BadNoise(params.noise_sigma))?;
    let jitter = |rng: &mut ChaCha8Rng| {
        if params.noise_sigma > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        }
    };
    let mut points = Vec::new();
    let mut sources = Vec::new();
    for (k, obj) in world.objects.iter().enumerate() {
        let n = poisson(obj.point_density * obj.volume(), &mut rng);
        let fp = obj.footprint;
        for _ in 0..n {
            let x = rng.random_range(fp.x_min..=fp.x_max);
            let y = rng.random_range(fp.y_min..=fp.y_max);
            let z = world.ground_z + rng.random_range(0.0..=obj.height);
            points.push([x + jitter(&mut rng), y + jitter(&mut rng), z + jitter(&mut rng)]);
            sources.push(PointSource::Object(k));
        }
    }
    let n_ground = poisson(params.ground_density * world.extent_x * world.extent_y, &mut rng);
    for _ in 0..n_ground {
        let x = rng.random_range(0.0..world.extent_x);
        let y = rng.random_range(0.0..world.extent_y);
        let z = world.ground_height(x, y) + jitter(&mut rng);
        points.push([x, y, z]);
        sources.push(PointSource::Ground);
    }
    Ok((PointCloud::new(points)?, sources))
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urban_world_is_mostly_structural() {
        let w = generate_world(Scenario::Urban, 50.0, 50.0, 1).unwrap();
        let (s, _) = w.class_fractions();
        assert!(s >= 0.7, "structural fraction {s}");
        assert!(!w.objects.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_world(Scenario::Forest, 50.0, 50.0, 1).unwrap();
        let b = generate_world(Scenario::Forest, 50.0, 50.0, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_world(Scenario::Forest, 50.0, 50.0, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mix_bounds_hold_across_seeds() {
        for seed in 1..=100 {
            for scenario in Scenario::ALL {
                let w = generate_world(scenario, 50.0, 50.0, seed).unwrap();
                let (s, v) = w.class_fractions();
                match scenario {
                    Scenario::Urban => assert!(s >= 0.7, "seed {seed}: {s}"),
                    Scenario::Forest => assert!(v >= 0.7, "seed {seed}: {v}"),
                    Scenario::Mixed => assert!(s <= 0.6 && v <= 0.6, "seed {seed}: {s} {v}"),
                }
            }
        }
    }

    #[test]
    fn objects_stay_inside_extent() {
        for seed in 0..20 {
            let w = generate_world(Scenario::Mixed, 30.0, 20.0, seed).unwrap();
            for o in &w.objects {
                assert!(o.footprint.x_min >= 0.0 && o.footprint.x_max <= 30.0);
                assert!(o.footprint.y_min >= 0.0 && o.footprint.y_max <= 20.0);
                assert!(o.height > 0.0 && o.footprint.area() > 0.0 && o.point_density > 0.0);
            }
        }
    }

    #[test]
    fn small_extent_is_rejected() {
        assert!(matches!(
            generate_world(Scenario::Urban, 9.5, 50.0, 1),
            Err(WorldError::ExtentTooSmall { .. })
        ));
    }

    #[test]
    fn empty_world_samples_only_ground() {
        let w = World::empty(20.0, 20.0);
        let params = CloudParams {
            noise_sigma: 0.0,
            ground_density: 2.0,
        };
        let (cloud, src) = sample_labeled_point_cloud(&w, &params, 3).unwrap();
        assert!(!cloud.is_empty());
        assert!(src.iter().all(|s| *s == PointSource::Ground));
        assert!(cloud.points().iter().all(|p| p[2] == 0.0));
    }

    #[test]
    fn noiseless_object_points_stay_in_their_box() {
        let w = generate_world(Scenario::Mixed, 40.0, 40.0, 9).unwrap();
        let params = CloudParams {
            noise_sigma: 0.0,
            ground_density: 1.0,
        };
        let (cloud, src) = sample_labeled_point_cloud(&w, &params, 4).unwrap();
        for (p, s) in cloud.points().iter().zip(&src) {
            if let PointSource::Object(k) = s {
                assert!(w.objects[*k].contains(*p, w.ground_z));
            }
        }
    }

    #[test]
    fn cloud_sampling_is_deterministic() {
        let w = generate_world(Scenario::Urban, 30.0, 30.0, 5).unwrap();
        let a = sample_point_cloud(&w, 0.05, 11).unwrap();
        let b = sample_point_cloud(&w, 0.05, 11).unwrap();
        assert_eq!(a.to_xyz(), b.to_xyz());
    }

    #[test]
    fn unit_box_point_count_follows_poisson_bounds() {
        let mut w = World::empty(10.0, 10.0);
        w.objects.push(PlacedObject {
            kind: ObjectKind::Rock,
            center: [5.0, 5.0],
            footprint: Footprint::centered(5.0, 5.0, 1.0, 1.0),
            height: 1.0,
            point_density: 100.0,
        });
        let params = CloudParams {
            noise_sigma: 0.0,
            ground_density: 0.0,
        };
        let inside = (0..1000)
            .filter(|&seed| {
                let (c, _) = sample_labeled_point_cloud(&w, &params, seed).unwrap();
                (60..=140).contains(&c.len())
            })
            .count();
        assert!(inside >= 990, "{inside} of 1000 seeds in [60, 140]");
    }

    #[test]
    fn world_json_round_trip() {
        let w = generate_world(Scenario::Forest, 25.0, 25.0, 8).unwrap();
        let text = w.to_json().unwrap();
        assert!(text.contains("\"format\": \"world.v1\""));
        assert_eq!(World::from_json(&text).unwrap(), w);
    }

    #[test]
    fn xyz_round_trip() {
        let w = generate_world(Scenario::Forest, 15.0, 15.0, 2).unwrap();
        let c = sample_point_cloud(&w, 0.02, 1).unwrap();
        assert_eq!(PointCloud::from_xyz(&c.to_xyz()).unwrap(), c);
    }
}
