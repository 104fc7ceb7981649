//! Synthetic ground truth: a 2-D lattice of Gaussian "atomic columns".

use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    Square,
    Hexagonal,
}

impl std::str::FromStr for Lattice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Lattice::Square),
            "hex" | "hexagonal" => Ok(Lattice::Hexagonal),
            other => Err(Error::InvalidParameter(format!("unknown lattice {other:?}"))),
        }
    }
}

impl std::fmt::Display for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Lattice::Square => "square",
            Lattice::Hexagonal => "hex",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomParams {
    pub height: usize,
    pub width: usize,
    pub lattice: Lattice,
    /// Distance between neighbouring columns, in pixels.
    pub spacing: f64,
    /// Gaussian std of each column, in pixels.
    pub sigma: f64,
    pub background: f64,
    /// Peak height of a column above the background.
    pub contrast: f64,
    /// Lattice rotation in degrees.
    pub rotation_deg: f64,
    /// Relative spread of column heights (0 disables).
    pub jitter: f64,
    /// Columns are kept only inside a centred disc of this radius, as a
    /// fraction of the smaller image side. `None` fills the whole field.
    pub particle_radius: Option<f64>,
    pub seed: u64,
}

impl PhantomParams {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            lattice: Lattice::Hexagonal,
            spacing: 6.0,
            sigma: 1.2,
            background: 0.1,
            contrast: 0.8,
            rotation_deg: 12.0,
            jitter: 0.1,
            particle_radius: Some(0.42),
            seed: 0,
        }
    }
}

/// Renders the lattice phantom, clamped to `[0, 1]`.
pub fn lattice_phantom(p: &PhantomParams) -> Result<Image> {
    if p.height == 0 || p.width == 0 {
        return Err(Error::InvalidParameter("phantom needs a non-empty image".into()));
    }
    if !(p.spacing > 0.0) || !(p.sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "phantom spacing and sigma must be positive (spacing={}, sigma={})",
            p.spacing, p.sigma
        )));
    }
    let (h, w) = (p.height as f64, p.width as f64);
    let (cy, cx) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);
    let theta = p.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let (b1, b2) = match p.lattice {
        Lattice::Square => ((p.spacing, 0.0), (0.0, p.spacing)),
        Lattice::Hexagonal => ((p.spacing, 0.0), (0.5 * p.spacing, 0.75f64.sqrt() * p.spacing)),
    };
    let rotate = |(x, y): (f64, f64)| (x * cos - y * sin, x * sin + y * cos);
    let (b1, b2) = (rotate(b1), rotate(b2));
    let radius = p.particle_radius.map(|f| f * h.min(w));
    let reach = (h.hypot(w) / (p.spacing * 0.75f64.sqrt().min(1.0))).ceil() as i64 + 2;

    let mut rng = rng_from_seed(p.seed);
    let mut data = vec![p.background; p.height * p.width];
    let cutoff = (4.0 * p.sigma).ceil() as i64;
    let inv = 1.0 / (2.0 * p.sigma * p.sigma);
    for i in -reach..=reach {
        for j in -reach..=reach {
            let x = cx + i as f64 * b1.0 + j as f64 * b2.0;
            let y = cy + i as f64 * b1.1 + j as f64 * b2.1;
            // Draw the jitter before any culling so the stream is stable.
            let height = p.contrast * (1.0 + p.jitter * (2.0 * rng.random::<f64>() - 1.0));
            if x < -4.0 * p.sigma || y < -4.0 * p.sigma || x > w + 4.0 * p.sigma || y > h + 4.0 * p.sigma {
                continue;
            }
            if let Some(r) = radius {
                if (x - cx).hypot(y - cy) > r {
                    continue;
                }
            }
            let (xi, yi) = (x.round() as i64, y.round() as i64);
            for yy in (yi - cutoff).max(0)..=(yi + cutoff).min(p.height as i64 - 1) {
                for xx in (xi - cutoff).max(0)..=(xi + cutoff).min(p.width as i64 - 1) {
                    let d2 = (xx as f64 - x).powi(2) + (yy as f64 - y).powi(2);
                    data[yy as usize * p.width + xx as usize] += height * (-d2 * inv).exp();
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    Image::new(p.height, p.width, data)
}
