//! Run configuration files.
//!
//! One setting per line, `section.key = value`, `#` starts a comment.
//! Numbers may be written as multiples of pi (`pi/12`, `3*pi/20`, `-pi`),
//! lists are comma separated. Every key is optional; missing keys take the
//! reference values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use mplc::alignment::{Collection, DiffuserSpec};
use mplc::beams::BeamArraySpec;
use mplc::design::DesignSetup;
use mplc::geometry::MplcGeometry;
use mplc::wfm::{MaskUpdate, PhaseReference, PlaneOrder};
use mplc::SamplingGrid;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Closed or half-open sample range `min + i·step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl SampleRange {
    fn count(&self, name: &str) -> Result<usize, ConfigError> {
        if !(self.step > 0.0) || !(self.max >= self.min) {
            return Err(ConfigError::Invalid(format!("{name}: need max >= min and step > 0")));
        }
        let n = (self.max - self.min) / self.step;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(ConfigError::Invalid(format!("{name}: step does not divide the range")));
        }
        Ok(n.round() as usize)
    }

    /// `min, …, max` inclusive.
    pub fn closed(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        let n = self.count(name)?;
        Ok((0..=n).map(|i| self.min + i as f64 * self.step).collect())
    }

    /// `min, …` excluding `max` (unless the range is a single point).
    pub fn half_open(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        let n = self.count(name)?;
        Ok((0..n.max(1)).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub theta: SampleRange,
    pub phi: SampleRange,
    pub correcting_mask: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub template: MplcGeometry,
    pub distances: Vec<f64>,
    pub waist_min: f64,
    pub waist_max: f64,
    pub waist_count: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbConfig {
    pub theta: f64,
    pub phi: f64,
    pub gradient: f64,
    pub correlation_length: f64,
    pub seed: u64,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnifeRunConfig {
    /// 1-based input beam that is scanned.
    pub beam: usize,
    pub step_pixels: usize,
    /// Half-width of the scan in beam radii.
    pub range: f64,
    pub diffuser: DiffuserSpec,
    pub realizations: usize,
    pub seed: u64,
    pub aperture_factor: f64,
    pub collection: Collection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub setup: DesignSetup,
    /// Output demagnification relative to the input array.
    pub demagnification: f64,
    pub sweep: SweepConfig,
    pub geometry: GeometryConfig,
    pub perturb: PerturbConfig,
    pub knife: KnifeRunConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = MplcGeometry::default();
        Self {
            setup: DesignSetup::reference(),
            demagnification: 4.0,
            sweep: SweepConfig {
                theta: SampleRange { min: 0.0, max: PI / 2.0, step: PI / 12.0 },
                phi: SampleRange { min: -PI, max: PI, step: PI / 6.0 },
                correcting_mask: false,
                workers: 1,
            },
            geometry: GeometryConfig {
                template: geometry,
                distances: (0..10).map(|i| 0.01 * (i + 1) as f64).collect(),
                waist_min: 100e-6,
                waist_max: 900e-6,
                waist_count: 81,
                angle_min_deg: 0.05,
                angle_max_deg: 5.0,
                angle_count: 100,
            },
            perturb: PerturbConfig {
                theta: PI / 4.0,
                phi: PI / 2.0,
                gradient: mplc::perturb::REFERENCE_GRADIENT,
                correlation_length: 4.0,
                seed: 1,
                alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25],
            },
            knife: KnifeRunConfig {
                beam: 1,
                step_pixels: 2,
                range: 2.5,
                diffuser: DiffuserSpec::default(),
                realizations: 16,
                seed: 0,
                aperture_factor: 3.0,
                collection: Collection::FarField,
            },
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Parses `1.5`, `-2e-3`, `pi`, `pi/12`, `3*pi/20`, `-pi/2`.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, t),
    };
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim().parse::<f64>().ok()?)),
        None => (t, None),
    };
    let factor = match num.split_once('*') {
        Some((k, p)) if p.trim() == "pi" => k.trim().parse::<f64>().ok()?,
        None if num == "pi" => 1.0,
        _ => return None,
    };
    let v = sign * factor * PI / den.unwrap_or(1.0);
    v.is_finite().then_some(v)
}

const UM: f64 = 1e6;
const CM: f64 = 1e2;
const MM: f64 = 1e3;
const NM: f64 = 1e9;

struct Entry {
    line: usize,
    value: String,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn value_err(key: &str, e: &Entry, message: impl Into<String>) -> ConfigError {
        ConfigError::Value { line: e.line, key: key.to_string(), message: message.into() }
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|e| parse_number(&e.value).ok_or_else(|| Self::value_err(key, &e, "expected a number")))
            .transpose()
    }

    /// Stores `value / per_meter`, so `per_meter = 1e6` reads micrometers.
    fn scaled(&mut self, key: &str, per_meter: f64, target: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.number(key)? {
            *target = v / per_meter;
        }
        Ok(())
    }

    fn plain(&mut self, key: &str, target: &mut f64) -> Result<(), ConfigError> {
        self.scaled(key, 1.0, target)
    }

    fn integer<T: std::str::FromStr>(&mut self, key: &str, target: &mut T) -> Result<(), ConfigError> {
        if let Some(e) = self.take(key) {
            *target = e.value.parse().map_err(|_| Self::value_err(key, &e, "expected a non-negative integer"))?;
        }
        Ok(())
    }

    fn flag(&mut self, key: &str, target: &mut bool) -> Result<(), ConfigError> {
        if let Some(e) = self.take(key) {
            *target = match e.value.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(Self::value_err(key, &e, "expected true or false")),
            };
        }
        Ok(())
    }

    fn list(&mut self, key: &str, per_unit: f64, target: &mut Vec<f64>) -> Result<(), ConfigError> {
        if let Some(e) = self.take(key) {
            if e.value.is_empty() {
                return Err(Self::value_err(key, &e, "empty list"));
            }
            *target = e
                .value
                .split(',')
                .map(|v| {
                    parse_number(v)
                        .map(|x| x / per_unit)
                        .ok_or_else(|| Self::value_err(key, &e, format!("`{}` is not a number", v.trim())))
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], target: &mut T) -> Result<(), ConfigError> {
        if let Some(e) = self.take(key) {
            *target = options.iter().find(|(name, _)| *name == e.value).map(|(_, v)| *v).ok_or_else(|| {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                Self::value_err(key, &e, format!("expected one of {}", names.join(", ")))
            })?;
        }
        Ok(())
    }
}

const PLANE_ORDERS: [(&str, PlaneOrder); 3] = [
    ("forward", PlaneOrder::Forward),
    ("backward", PlaneOrder::Backward),
    ("alternating", PlaneOrder::Alternating),
];
const PHASE_REFERENCES: [(&str, PhaseReference); 2] =
    [("overlap", PhaseReference::Overlap), ("plain_integral", PhaseReference::PlainIntegral)];
const MASK_UPDATES: [(&str, MaskUpdate); 2] = [("replace", MaskUpdate::Replace), ("incremental", MaskUpdate::Incremental)];
const COLLECTIONS: [(&str, Collection); 2] = [("far_field", Collection::FarField), ("output_plane", Collection::OutputPlane)];

fn name_of<T: PartialEq>(options: &[(&'static str, T)], value: &T) -> &'static str {
    options.iter().find(|(_, v)| v == value).map(|(n, _)| *n).expect("every variant is listed")
}

fn place_array(spec: &mut BeamArraySpec, center: (f64, f64)) {
    let half = (spec.count.max(1) - 1) as f64 * spec.spacing / 2.0;
    spec.axis_origin = (center.0, center.1 - half);
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `section.key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.split('.').count() != 2 || key.split('.').any(str::is_empty) {
                return Err(ConfigError::Syntax { line, message: format!("key `{key}` is not of the form section.key") });
            }
            if entries.insert(key.to_string(), Entry { line, value: value.to_string() }).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
        }
        let mut f = Fields { entries };
        let mut c = RunConfig::default();

        let (mut nx, mut ny, mut pitch) = (c.setup.grid.nx(), c.setup.grid.ny(), c.setup.grid.pitch());
        f.integer("grid.nx", &mut nx)?;
        f.integer("grid.ny", &mut ny)?;
        f.scaled("grid.pitch_um", UM, &mut pitch)?;

        let s = &mut c.setup;
        f.integer("cascade.planes", &mut s.planes)?;
        f.scaled("cascade.plane_spacing_cm", CM, &mut s.plane_spacing)?;
        f.scaled("cascade.wavelength_nm", NM, &mut s.input.wavelength)?;

        let input = &mut s.input;
        let mut center = input.array_center();
        f.integer("input.m", &mut input.count)?;
        f.scaled("input.waist_um", UM, &mut input.waist)?;
        f.scaled("input.waist_offset_cm", CM, &mut input.waist_offset_z)?;
        f.scaled("input.spacing_um", UM, &mut input.spacing)?;
        f.scaled("input.center_x_um", UM, &mut center.0)?;
        f.scaled("input.center_y_um", UM, &mut center.1)?;
        if let Some(v) = f.number("input.tilt_rad_per_px")? {
            input.tilt_gradient = v / pitch;
        }
        let mut tilt_beam = input.tilt_beam.unwrap_or(0);
        f.integer("input.tilt_beam_index", &mut tilt_beam)?;
        input.tilt_beam = (tilt_beam > 0).then_some(tilt_beam);
        place_array(input, center);

        let mut output_center = center;
        f.plain("output.demagnification", &mut c.demagnification)?;
        f.scaled("output.center_x_um", UM, &mut output_center.0)?;
        f.scaled("output.center_y_um", UM, &mut output_center.1)?;

        let o = &mut s.optimizer;
        f.integer("optimizer.iterations", &mut o.iterations)?;
        f.choice("optimizer.plane_order", &PLANE_ORDERS, &mut o.plane_order)?;
        f.choice("optimizer.phase_reference", &PHASE_REFERENCES, &mut o.phase_reference)?;
        f.choice("optimizer.mask_update", &MASK_UPDATES, &mut o.mask_update)?;
        f.flag("optimizer.record_history", &mut o.record_history)?;
        if let Some(e) = f.take("optimizer.stop_fidelity") {
            o.stop_fidelity = match e.value.as_str() {
                "none" => None,
                v => Some(
                    parse_number(v)
                        .ok_or_else(|| Fields::value_err("optimizer.stop_fidelity", &e, "expected a number or none"))?,
                ),
            };
        }

        let sw = &mut c.sweep;
        f.plain("sweep.theta_min", &mut sw.theta.min)?;
        f.plain("sweep.theta_max", &mut sw.theta.max)?;
        f.plain("sweep.theta_step", &mut sw.theta.step)?;
        f.plain("sweep.phi_min", &mut sw.phi.min)?;
        f.plain("sweep.phi_max", &mut sw.phi.max)?;
        f.plain("sweep.phi_step", &mut sw.phi.step)?;
        f.flag("sweep.correcting_mask", &mut sw.correcting_mask)?;
        f.integer("sweep.workers", &mut sw.workers)?;

        let g = &mut c.geometry;
        f.scaled("geometry.slm_width_mm", MM, &mut g.template.slm_width)?;
        f.scaled("geometry.slm_height_mm", MM, &mut g.template.slm_height)?;
        f.scaled("geometry.pixel_pitch_um", UM, &mut g.template.pixel_pitch)?;
        f.integer("geometry.guard_pixels", &mut g.template.guard_pixels)?;
        f.list("geometry.distances_cm", CM, &mut g.distances)?;
        f.scaled("geometry.waist_min_um", UM, &mut g.waist_min)?;
        f.scaled("geometry.waist_max_um", UM, &mut g.waist_max)?;
        f.integer("geometry.waist_count", &mut g.waist_count)?;
        f.plain("geometry.angle_min_deg", &mut g.angle_min_deg)?;
        f.plain("geometry.angle_max_deg", &mut g.angle_max_deg)?;
        f.integer("geometry.angle_count", &mut g.angle_count)?;

        let p = &mut c.perturb;
        f.plain("perturb.theta", &mut p.theta)?;
        f.plain("perturb.phi", &mut p.phi)?;
        f.plain("perturb.gradient_rad_per_px", &mut p.gradient)?;
        f.plain("perturb.correlation_px", &mut p.correlation_length)?;
        f.integer("perturb.seed", &mut p.seed)?;
        f.list("perturb.alphas", 1.0, &mut p.alphas)?;

        let k = &mut c.knife;
        f.integer("knife.beam", &mut k.beam)?;
        f.integer("knife.step_px", &mut k.step_pixels)?;
        f.plain("knife.range_waists", &mut k.range)?;
        f.plain("knife.mean_counts", &mut k.diffuser.mean_counts)?;
        f.plain("knife.sd_counts", &mut k.diffuser.sd_counts)?;
        f.plain("knife.counts_per_turn", &mut k.diffuser.counts_per_turn)?;
        f.integer("knife.realizations", &mut k.realizations)?;
        f.integer("knife.seed", &mut k.seed)?;
        f.plain("knife.aperture_factor", &mut k.aperture_factor)?;
        f.choice("knife.collection", &COLLECTIONS, &mut k.collection)?;

        if let Some(e) = f.take("run.out_dir") {
            c.out_dir = PathBuf::from(e.value);
        }

        if let Some((key, e)) = f.entries.into_iter().min_by_key(|(_, e)| e.line) {
            return Err(ConfigError::UnknownKey { line: e.line, key });
        }

        c.setup.grid = SamplingGrid::centered(nx, ny, pitch).map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
        c.geometry.template.wavelength = c.setup.input.wavelength;
        c.geometry.template.planes = c.setup.planes;
        c.setup.output = c.setup.input.demagnified(c.demagnification);
        place_array(&mut c.setup.output, output_center);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.setup.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(t) = self.setup.input.tilt_beam {
            if t > self.setup.input.count {
                return Err(ConfigError::Invalid(format!("input.tilt_beam_index {t} exceeds input.m = {}", self.setup.input.count)));
            }
        }
        if !(self.demagnification > 0.0) {
            return Err(ConfigError::Invalid("output.demagnification must be positive".into()));
        }
        if self.setup.optimizer.iterations == 0 {
            return Err(ConfigError::Invalid("optimizer.iterations must be at least 1".into()));
        }
        self.sweep.theta.closed("sweep.theta")?;
        self.sweep.phi.half_open("sweep.phi")?;
        if self.sweep.workers == 0 {
            return Err(ConfigError::Invalid("sweep.workers must be at least 1".into()));
        }
        if self.geometry.distances.is_empty() {
            return Err(ConfigError::Invalid("geometry.distances_cm is empty".into()));
        }
        if self.knife.step_pixels == 0 || self.knife.realizations == 0 {
            return Err(ConfigError::Invalid("knife.step_px and knife.realizations must be at least 1".into()));
        }
        if self.knife.beam == 0 || self.knife.beam > self.setup.input.count {
            return Err(ConfigError::Invalid(format!("knife.beam must be in 1..={}", self.setup.input.count)));
        }
        Ok(())
    }

    /// Every setting that influences results, one `key = value` per line in
    /// a fixed order. Worker count and output directory are left out.
    pub fn canonical(&self) -> String {
        let s = &self.setup;
        let pitch = s.grid.pitch();
        let (cx, cy) = s.input.array_center();
        let (ox, oy) = s.output.array_center();
        let o = &s.optimizer;
        let g = &self.geometry;
        let p = &self.perturb;
        let k = &self.knife;
        let num = |v: f64| format!("{v:?}");
        let list = |v: &[f64], per: f64| v.iter().map(|x| num(x * per)).collect::<Vec<_>>().join(",");
        let stop = o.stop_fidelity.map_or("none".to_string(), num);
        let lines: Vec<(&str, String)> = vec![
            ("grid.nx", s.grid.nx().to_string()),
            ("grid.ny", s.grid.ny().to_string()),
            ("grid.pitch_um", num(pitch * UM)),
            ("cascade.planes", s.planes.to_string()),
            ("cascade.plane_spacing_cm", num(s.plane_spacing * CM)),
            ("cascade.wavelength_nm", num(s.input.wavelength * NM)),
            ("input.m", s.input.count.to_string()),
            ("input.waist_um", num(s.input.waist * UM)),
            ("input.waist_offset_cm", num(s.input.waist_offset_z * CM)),
            ("input.spacing_um", num(s.input.spacing * UM)),
            ("input.center_x_um", num(cx * UM)),
            ("input.center_y_um", num(cy * UM)),
            ("input.tilt_rad_per_px", num(s.input.tilt_gradient * pitch)),
            ("input.tilt_beam_index", s.input.tilt_beam.unwrap_or(0).to_string()),
            ("output.demagnification", num(self.demagnification)),
            ("output.center_x_um", num(ox * UM)),
            ("output.center_y_um", num(oy * UM)),
            ("optimizer.iterations", o.iterations.to_string()),
            ("optimizer.plane_order", name_of(&PLANE_ORDERS, &o.plane_order).into()),
            ("optimizer.phase_reference", name_of(&PHASE_REFERENCES, &o.phase_reference).into()),
            ("optimizer.mask_update", name_of(&MASK_UPDATES, &o.mask_update).into()),
            ("optimizer.record_history", o.record_history.to_string()),
            ("optimizer.stop_fidelity", stop),
            ("sweep.theta_min", num(self.sweep.theta.min)),
            ("sweep.theta_max", num(self.sweep.theta.max)),
            ("sweep.theta_step", num(self.sweep.theta.step)),
            ("sweep.phi_min", num(self.sweep.phi.min)),
            ("sweep.phi_max", num(self.sweep.phi.max)),
            ("sweep.phi_step", num(self.sweep.phi.step)),
            ("sweep.correcting_mask", self.sweep.correcting_mask.to_string()),
            ("geometry.slm_width_mm", num(g.template.slm_width * MM)),
            ("geometry.slm_height_mm", num(g.template.slm_height * MM)),
            ("geometry.pixel_pitch_um", num(g.template.pixel_pitch * UM)),
            ("geometry.guard_pixels", g.template.guard_pixels.to_string()),
            ("geometry.distances_cm", list(&g.distances, CM)),
            ("geometry.waist_min_um", num(g.waist_min * UM)),
            ("geometry.waist_max_um", num(g.waist_max * UM)),
            ("geometry.waist_count", g.waist_count.to_string()),
            ("geometry.angle_min_deg", num(g.angle_min_deg)),
            ("geometry.angle_max_deg", num(g.angle_max_deg)),
            ("geometry.angle_count", g.angle_count.to_string()),
            ("perturb.theta", num(p.theta)),
            ("perturb.phi", num(p.phi)),
            ("perturb.gradient_rad_per_px", num(p.gradient)),
            ("perturb.correlation_px", num(p.correlation_length)),
            ("perturb.seed", p.seed.to_string()),
            ("perturb.alphas", list(&p.alphas, 1.0)),
            ("knife.beam", k.beam.to_string()),
            ("knife.step_px", k.step_pixels.to_string()),
            ("knife.range_waists", num(k.range)),
            ("knife.mean_counts", num(k.diffuser.mean_counts)),
            ("knife.sd_counts", num(k.diffuser.sd_counts)),
            ("knife.counts_per_turn", num(k.diffuser.counts_per_turn)),
            ("knife.realizations", k.realizations.to_string()),
            ("knife.seed", k.seed.to_string()),
            ("knife.aperture_factor", num(k.aperture_factor)),
            ("knife.collection", name_of(&COLLECTIONS, &k.collection).into()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("1.5"), Some(1.5));
        assert_eq!(parse_number("-2e-3"), Some(-2e-3));
        assert_eq!(parse_number("pi"), Some(PI));
        assert_eq!(parse_number("-pi"), Some(-PI));
        assert_eq!(parse_number("pi/12"), Some(PI / 12.0));
        assert_eq!(parse_number("3*pi/20"), Some(3.0 * PI / 20.0));
        assert_eq!(parse_number(" -pi / 2 "), Some(-PI / 2.0));
        assert_eq!(parse_number("tau"), None);
        assert_eq!(parse_number("1/0"), None);
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn empty_config_is_the_reference() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.setup, DesignSetup::reference());
        assert_eq!(c.sweep.theta.closed("t").unwrap().len(), 7);
        assert_eq!(c.sweep.phi.half_open("p").unwrap().len(), 12);
    }

    #[test]
    fn values_are_applied() {
        let c = RunConfig::parse(
            "grid.nx = 64\ngrid.ny = 64   # small\noptimizer.iterations = 7\noptimizer.plane_order = alternating\n\
             sweep.theta_step = pi/4\nsweep.correcting_mask = true\nperturb.alphas = 0, 0.5\ninput.tilt_beam_index = 0\ngeometry.distances_cm = 1, 2.5\n",
        )
        .unwrap();
        assert_eq!(c.setup.grid.nx(), 64);
        assert_eq!(c.setup.optimizer.iterations, 7);
        assert_eq!(c.setup.optimizer.plane_order, PlaneOrder::Alternating);
        assert_eq!(c.sweep.theta.closed("t").unwrap().len(), 3);
        assert!(c.sweep.correcting_mask);
        assert_eq!(c.perturb.alphas, vec![0.0, 0.5]);
        assert_eq!(c.setup.input.tilt_beam, None);
        assert_eq!(c.geometry.distances, vec![0.01, 0.025]);
    }

    #[test]
    fn beam_block_units() {
        let c = RunConfig::parse(
            "grid.pitch_um = 10\ninput.m = 3\ninput.waist_um = 120\ninput.waist_offset_cm = -1.5\ninput.spacing_um = 500\n\
             input.tilt_rad_per_px = pi/10\ninput.tilt_beam_index = 3\noutput.demagnification = 2\n",
        )
        .unwrap();
        let input = &c.setup.input;
        assert_eq!(input.count, 3);
        assert_eq!(input.waist, 120e-6);
        assert_eq!(input.waist_offset_z, -0.015);
        assert_eq!(input.center(1), (0.0, -500e-6));
        assert!((input.tilt_gradient - PI / 10.0 / 10e-6).abs() < 1e-9);
        assert_eq!(input.tilt_beam, Some(3));
        assert_eq!(c.setup.output.waist, 60e-6);
        assert_eq!(c.setup.output.center(3), (0.0, 250e-6));
        assert!(RunConfig::parse("input.tilt_beam_index = 3").is_err());
    }

    #[test]
    fn errors_name_line_and_key() {
        assert_eq!(
            RunConfig::parse("grid.nx = 64\ngrid.colour = red\n"),
            Err(ConfigError::UnknownKey { line: 2, key: "grid.colour".into() })
        );
        assert!(matches!(RunConfig::parse("grid.nx 64"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("nx = 64"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            RunConfig::parse("grid.nx = 64\ngrid.nx = 32"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        let e = RunConfig::parse("\n\nsweep.workers = many").unwrap_err();
        assert!(e.to_string().contains("line 3") && e.to_string().contains("sweep.workers"));
        assert!(RunConfig::parse("sweep.theta_step = 0.3").is_err());
        assert!(RunConfig::parse("sweep.workers = 0").is_err());
        assert!(RunConfig::parse("optimizer.plane_order = sideways").is_err());
        assert!(RunConfig::parse("geometry.distances_cm =").is_err());
        assert!(RunConfig::parse("grid.nx.y = 3").is_err());
    }

    #[test]
    fn hash_ignores_layout_and_workers() {
        let a = RunConfig::parse("grid.nx = 64\n").unwrap();
        let b = RunConfig::parse("# comment\n  grid.nx=64  \nsweep.workers = 8\nrun.out_dir = elsewhere\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse("grid.nx = 32\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn canonical_text_parses_back() {
        let a = RunConfig::parse("grid.nx = 64\nsweep.phi_step = pi/3\noptimizer.stop_fidelity = 0.99\n").unwrap();
        let b = RunConfig::parse(&a.canonical()).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.setup, b.setup);
    }
}
