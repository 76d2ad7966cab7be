//! Imaging-model calculators for the sight-pipe optics.
//!
//! Lengths are millimetres, pixel equivalents are µm/pixel and angles are
//! radians unless a name says otherwise. Every function here is pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bore geometry under inspection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    /// Inner radius, mm.
    pub radius: f64,
    /// Depth, mm.
    pub depth: f64,
}

impl HoleSpec {
    pub fn new(radius: f64, depth: f64) -> Result<Self> {
        let hole = Self { radius, depth };
        hole.validate()?;
        Ok(hole)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hole radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hole depth must be positive, got {}",
                self.depth
            )));
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn circumference(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius
    }

    /// True inside the device envelope: 4–6 mm diameter, at most 47 mm deep.
    pub fn in_supported_range(&self) -> bool {
        let d = self.diameter();
        (4.0..=6.0).contains(&d) && self.depth <= 47.0
    }
}

/// Imaging-chain geometry and pixel equivalents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticsConfig {
    /// Effective diameter of the reflecting plane, mm.
    pub d_p: f64,
    /// Effective image diameter on the image plane, mm.
    pub d_w: f64,
    /// Image plane to eyepiece, mm.
    pub l_w: f64,
    /// Lens length, mm.
    pub l_n: f64,
    /// Objective lens to reflecting plane, mm.
    pub l_d: f64,
    /// Horizontal (circumferential) pixel equivalent, µm/pixel.
    pub p_x: f64,
    /// Vertical (axial) pixel equivalent, µm/pixel.
    pub p_y: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            d_p: 2.5,
            d_w: 2.0,
            l_w: 15.0,
            l_n: 230.0,
            l_d: 94.0,
            p_x: 2.16,
            p_y: 2.16,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d_p", self.d_p),
            ("d_w", self.d_w),
            ("l_w", self.l_w),
            ("l_n", self.l_n),
            ("l_d", self.l_d),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.p_x > 0.0 && self.p_y > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pixel equivalents must be positive, got ({}, {})",
                self.p_x, self.p_y
            )));
        }
        if !(self.chain_length() > 0.0) {
            return Err(Error::InvalidConfig(
                "l_w + l_n + l_d must be positive".into(),
            ));
        }
        Ok(())
    }

    /// l_w + l_n + l_d
    pub fn chain_length(&self) -> f64 {
        self.l_w + self.l_n + self.l_d
    }

    pub fn p_x_mm(&self) -> f64 {
        self.p_x * 1e-3
    }

    pub fn p_y_mm(&self) -> f64 {
        self.p_y * 1e-3
    }
}

/// Axis misalignment of the sight-pipe relative to the bore.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationSpec {
    /// Lever arm from the deviation start to the pipe end, mm.
    pub lever: f64,
    /// Tilt angle, radians.
    pub angle: f64,
    /// Parallel shift, mm.
    pub shift: f64,
}

impl DeviationSpec {
    pub fn from_degrees(lever: f64, angle_deg: f64, shift: f64) -> Result<Self> {
        if !(lever >= 0.0) || !(shift >= 0.0) {
            return Err(Error::Domain(format!(
                "lever and shift must be >= 0, got {lever}, {shift}"
            )));
        }
        if !(0.0..90.0).contains(&angle_deg) {
            return Err(Error::Domain(format!(
                "deviation angle must be in [0, 90) degrees, got {angle_deg}"
            )));
        }
        Ok(Self {
            lever,
            angle: angle_deg.to_radians(),
            shift,
        })
    }
}

/// Half-angle subtended by the effective image at the optical centre.
pub fn fov_half_angle(cfg: &OpticsConfig) -> Result<f64> {
    let len = cfg.chain_length();
    if !(len > 0.0) {
        return Err(Error::InvalidConfig(
            "l_w + l_n + l_d must be positive".into(),
        ));
    }
    Ok(((cfg.d_w + cfg.d_p) / (2.0 * len)).atan())
}

/// Distance from the image plane to the optical centre, l_s.
pub fn image_plane_distance(cfg: &OpticsConfig) -> Result<f64> {
    let aperture = cfg.d_w + cfg.d_p;
    if !(aperture > 0.0) {
        return Err(Error::DegenerateOptics(
            "d_w + d_p must be positive".into(),
        ));
    }
    Ok(cfg.d_w * cfg.chain_length() / aperture)
}

/// Object-side extent d_m seen through the reflecting plane at radius `r`.
pub fn object_extent(cfg: &OpticsConfig, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be >= 0, got {r}")));
    }
    let len = cfg.chain_length();
    if !(len > 0.0) {
        return Err(Error::InvalidConfig(
            "l_w + l_n + l_d must be positive".into(),
        ));
    }
    Ok(cfg.d_p + r * (cfg.d_w + cfg.d_p) / len)
}

fn check_chord(r: f64, d_m: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    if !(d_m > 0.0) {
        return Err(Error::Domain(format!("chord must be positive, got {d_m}")));
    }
    if d_m > 2.0 * r {
        return Err(Error::ChordExceedsDiameter {
            chord: d_m,
            diameter: 2.0 * r,
        });
    }
    Ok(())
}

/// Arc length d_s on the bore wall that projects onto a flat chord of `d_m`.
pub fn arc_expansion(r: f64, d_m: f64) -> Result<f64> {
    check_chord(r, d_m)?;
    Ok(2.0 * r * (d_m / (2.0 * r)).asin())
}

/// Relative projection error (d_s - d_m) / d_m.
pub fn projection_error_ratio(r: f64, d_m: f64) -> Result<f64> {
    let d_s = arc_expansion(r, d_m)?;
    Ok((d_s - d_m) / d_m)
}

/// Combined tilt + shift displacement of the reflecting plane.
pub fn deviation_total(dev: &DeviationSpec) -> f64 {
    (dev.lever * dev.angle.sin()).hypot(dev.shift)
}

/// Minimum and maximum field of view under a reflecting-plane displacement.
pub fn fov_bounds(d_m: f64, d_p: f64, r: f64, p_total: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let delta = p_total / r * (d_m - d_p);
    Ok((d_m - delta, d_m + delta))
}

/// Maximum relative field-of-view error, (p_total / r)(1 - d_p / d_m).
pub fn relative_fov_error(d_m: f64, d_p: f64, r: f64, p_total: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    if d_m == 0.0 {
        return Err(Error::Domain("d_m must be non-zero".into()));
    }
    Ok(p_total / r * (1.0 - d_p / d_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_optics() -> OpticsConfig {
        OpticsConfig::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn half_angle_reference() {
        let beta = fov_half_angle(&reference_optics()).unwrap();
        assert!(close(beta, 0.006_637_070_683_989_758, 1e-15));
    }

    #[test]
    fn half_angle_zero_aperture_and_scale_invariance() {
        let mut cfg = reference_optics();
        cfg.d_w = 0.0;
        cfg.d_p = 0.0;
        assert_eq!(fov_half_angle(&cfg).unwrap(), 0.0);

        let base = fov_half_angle(&reference_optics()).unwrap();
        let mut doubled = reference_optics();
        doubled.d_w *= 2.0;
        doubled.d_p *= 2.0;
        doubled.l_w *= 2.0;
        doubled.l_n *= 2.0;
        doubled.l_d *= 2.0;
        assert!(close(fov_half_angle(&doubled).unwrap(), base, 1e-15));
    }

    #[test]
    fn half_angle_rejects_zero_chain() {
        let mut cfg = reference_optics();
        cfg.l_w = 0.0;
        cfg.l_n = 0.0;
        cfg.l_d = 0.0;
        assert!(matches!(fov_half_angle(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn image_plane_distance_cases() {
        let l_s = image_plane_distance(&reference_optics()).unwrap();
        assert!(close(l_s, 150.666_666_666_666_67, 1e-9));

        let mut sym = reference_optics();
        sym.d_p = sym.d_w;
        assert!(close(image_plane_distance(&sym).unwrap(), 169.5, 1e-12));

        let mut pin = reference_optics();
        pin.d_p = 0.0;
        assert!(close(image_plane_distance(&pin).unwrap(), 339.0, 1e-12));

        let mut degenerate = reference_optics();
        degenerate.d_p = 0.0;
        degenerate.d_w = 0.0;
        assert!(matches!(
            image_plane_distance(&degenerate),
            Err(Error::DegenerateOptics(_))
        ));
    }

    #[test]
    fn object_extent_cases() {
        let cfg = reference_optics();
        let d_m = object_extent(&cfg, 2.0).unwrap();
        assert!(close(d_m, 2.526_548_672_566_371_5, 1e-12));
        assert!(close(d_m, 2.53, 0.005));
        assert_eq!(object_extent(&cfg, 0.0).unwrap(), cfg.d_p);

        let mut c93 = cfg;
        c93.l_d = 93.0;
        assert!(close(object_extent(&c93, 3.0).unwrap(), 2.539_940_828_402_367, 1e-12));

        assert!(matches!(object_extent(&cfg, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn arc_expansion_cases() {
        // mpmath at 30 digits: 4 asin(2.53/4)
        let d_s = arc_expansion(2.0, 2.53).unwrap();
        assert!(close(d_s, 2.739_106_448_981_995, 1e-12));
        assert!(close(d_s, 2.74, 0.005));

        let half = arc_expansion(2.0, 4.0).unwrap();
        assert!(close(half, 2.0 * std::f64::consts::PI, 1e-12));

        assert!(close(arc_expansion(3.0, 2.53).unwrap(), 2.611_695_604_347_223, 1e-12));

        assert!(matches!(
            arc_expansion(2.0, 4.01),
            Err(Error::ChordExceedsDiameter { .. })
        ));
        assert!(matches!(arc_expansion(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn projection_error_cases() {
        let ratio = projection_error_ratio(2.0, 2.53).unwrap();
        assert!(close(ratio, 0.082_650_770_348_614_78, 1e-12));
        assert!(close(ratio * 100.0, 8.30, 0.05));
        assert!(projection_error_ratio(2.0, 1e-6).unwrap() < 1e-12);
        assert!(close(
            projection_error_ratio(3.0, 2.53).unwrap(),
            0.032_290_752_706_422_34,
            1e-12
        ));
    }

    #[test]
    fn deviation_cases() {
        let dev = DeviationSpec::from_degrees(45.0, 0.5, 0.2).unwrap();
        assert!(close(deviation_total(&dev), 0.440_691_109_683_268_2, 1e-12));
        let none = DeviationSpec::from_degrees(45.0, 0.0, 0.0).unwrap();
        assert_eq!(deviation_total(&none), 0.0);
        let shift = DeviationSpec::from_degrees(45.0, 0.0, 0.2).unwrap();
        assert!(close(deviation_total(&shift), 0.2, 1e-15));
        assert!(DeviationSpec::from_degrees(45.0, 90.0, 0.2).is_err());
        assert!(DeviationSpec::from_degrees(-1.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn fov_bounds_cases() {
        let (lo, hi) = fov_bounds(2.53, 2.5, 2.0, 0.44).unwrap();
        assert!(close(lo, 2.5234, 1e-12));
        assert!(close(hi, 2.5366, 1e-12));
        assert_eq!(fov_bounds(2.53, 2.5, 2.0, 0.0).unwrap(), (2.53, 2.53));
        assert_eq!(fov_bounds(2.5, 2.5, 2.0, 0.44).unwrap(), (2.5, 2.5));
        assert!(fov_bounds(2.53, 2.5, 0.0, 0.44).is_err());
    }

    #[test]
    fn relative_fov_error_cases() {
        let eps = relative_fov_error(2.53, 2.5, 2.0, 0.44).unwrap();
        assert!(close(eps, 0.002_608_695_652_173_9, 1e-12));
        assert!(close(eps * 100.0, 0.26, 0.01));
        assert_eq!(relative_fov_error(2.53, 2.5, 2.0, 0.0).unwrap(), 0.0);
        let eps8 = relative_fov_error(2.551, 2.5, 4.0, 0.44).unwrap();
        assert!(close(eps8, 0.002_199_137_593_100_745, 1e-12));
        assert!(close(eps8 * 100.0, 0.22, 0.005));
        assert!(relative_fov_error(0.0, 2.5, 2.0, 0.44).is_err());
    }

    #[test]
    fn supported_range_flag() {
        assert!(HoleSpec::new(2.0, 47.0).unwrap().in_supported_range());
        assert!(!HoleSpec::new(4.0, 47.0).unwrap().in_supported_range());
        assert!(!HoleSpec::new(2.0, 50.0).unwrap().in_supported_range());
        assert!(HoleSpec::new(0.0, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn arc_never_shorter_than_chord(r in 0.1f64..10.0, frac in 1e-6f64..1.0) {
            let d_m = 2.0 * r * frac;
            prop_assert!(arc_expansion(r, d_m).unwrap() >= d_m);
        }

        #[test]
        fn projection_error_monotone(r in 0.5f64..5.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let e_lo = projection_error_ratio(r, 2.0 * r * lo).unwrap();
            let e_hi = projection_error_ratio(r, 2.0 * r * hi).unwrap();
            prop_assert!(e_hi > e_lo);
            // larger radius, same chord: smaller error
            let d_m = 2.0 * r * lo;
            prop_assert!(projection_error_ratio(r * 1.5, d_m).unwrap() < e_lo);
        }

        #[test]
        fn fov_bounds_symmetric(d_p in 0.5f64..3.0, extra in 0.0f64..1.0, r in 0.5f64..5.0, p in 0.0f64..1.0) {
            let d_m = d_p + extra;
            let (lo, hi) = fov_bounds(d_m, d_p, r, p).unwrap();
            prop_assert!(((lo + hi) / 2.0 - d_m).abs() <= 1e-12 * d_m.max(1.0));
        }

        #[test]
        fn deviation_between_max_and_sum(l in 0.0f64..100.0, phi in 0.0f64..89.0, p in 0.0f64..2.0) {
            let dev = DeviationSpec::from_degrees(l, phi, p).unwrap();
            let tilt = l * phi.to_radians().sin();
            let total = deviation_total(&dev);
            prop_assert!(total >= tilt.max(p) - 1e-12);
            prop_assert!(total <= tilt + p + 1e-12);
        }

        #[test]
        fn half_angle_and_image_distance_consistent(
            d_w in 0.1f64..5.0, d_p in 0.1f64..5.0,
            l_w in 1.0f64..50.0, l_n in 1.0f64..300.0, l_d in 1.0f64..150.0,
        ) {
            let cfg = OpticsConfig { d_w, d_p, l_w, l_n, l_d, p_x: 1.0, p_y: 1.0 };
            let t = fov_half_angle(&cfg).unwrap().tan();
            let l_s = image_plane_distance(&cfg).unwrap();
            let len = cfg.chain_length();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            prop_assert!(rel(d_w / (2.0 * l_s), t) < 1e-12);
            prop_assert!(rel(d_p / (2.0 * (len - l_s)), t) < 1e-12);
            prop_assert!(rel((d_w + d_p) / (2.0 * len), t) < 1e-12);
        }
    }
}
