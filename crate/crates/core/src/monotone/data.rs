use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::io::{decode_binary, decode_csv};
use crate::fields::{Field, GridSpec};
use crate::flows::GaussianSpec;

/// Number of components in a random bump.
const RANDOM_COMPONENTS: usize = 3;

/// Named test data. All presets are nonnegative Gaussian mixtures, so every
/// monotone quantity's hypotheses hold for them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Unit-norm `c e^{-|x|^2}`.
    Gaussian,
    /// `e^{-|x - a|^2} + e^{-2|x - b|^2} / 2` with fixed off-centre `a`, `b`.
    TwoBump,
    /// Three seeded Gaussian components; `None` takes the run seed.
    RandomBump(Option<u64>),
    /// A field in the binary field format.
    File(PathBuf),
}

impl DataSource {
    /// Samples the data on `grid`. `seed` is used by unseeded random bumps.
    pub fn build(&self, grid: &GridSpec, seed: u64) -> Result<Field> {
        let components = match self {
            DataSource::Gaussian => vec![GaussianSpec::normalized(grid.dim(), 1.0)?],
            DataSource::TwoBump => {
                let mut a = vec![0.0; grid.dim()];
                let mut b = vec![0.0; grid.dim()];
                a[0] = 0.7;
                b[0] = -0.8;
                if grid.dim() > 1 {
                    a[1] = -0.2;
                    b[1] = 0.3;
                }
                vec![bump(1.0, a, 1.0)?, bump(0.5, b, 2.0)?]
            }
            DataSource::RandomBump(explicit) => random_components(grid.dim(), explicit.unwrap_or(seed))?,
            DataSource::File(path) => {
                let field = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    decode_csv(&std::fs::read_to_string(path)?)?
                } else {
                    decode_binary(&std::fs::read(path)?)?
                };
                if !field.grid().approx_eq(grid) {
                    return Err(Error::Config(format!(
                        "{} is sampled on a different grid than the run",
                        path.display()
                    )));
                }
                return Ok(field);
            }
        };
        Ok(Field::from_real_fn(*grid, |x| {
            components.iter().map(|g| g.eval(x).re).sum()
        })
        .into_nonnegative(0.0)
        .expect("mixtures of positive bumps are nonnegative"))
    }

    /// The seed that actually determines the data, if any.
    pub fn effective_seed(&self, seed: u64) -> Option<u64> {
        match self {
            DataSource::RandomBump(explicit) => Some(explicit.unwrap_or(seed)),
            _ => None,
        }
    }
}

fn bump(amplitude: f64, center: Vec<f64>, width: f64) -> Result<GaussianSpec> {
    GaussianSpec::new(Complex64::new(amplitude, 0.0), center, Complex64::new(width, 0.0))
}

fn random_components(dim: usize, seed: u64) -> Result<Vec<GaussianSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..RANDOM_COMPONENTS)
        .map(|_| {
            let amplitude = rng.gen_range(0.3..1.0);
            let center = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let width = rng.gen_range(0.5..2.0);
            bump(amplitude, center, width)
        })
        .collect()
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Gaussian => write!(f, "gaussian"),
            DataSource::TwoBump => write!(f, "two_bump"),
            DataSource::RandomBump(None) => write!(f, "random_bump"),
            DataSource::RandomBump(Some(s)) => write!(f, "random_bump({s})"),
            DataSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Accepts `gaussian`, `two_bump`, `random_bump`, `random_bump(7)` and
/// `file:<path>`.
impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(DataSource::File(PathBuf::from(path)));
        }
        match s {
            "gaussian" => return Ok(DataSource::Gaussian),
            "two_bump" => return Ok(DataSource::TwoBump),
            "random_bump" => return Ok(DataSource::RandomBump(None)),
            _ => {}
        }
        let seed = s
            .strip_prefix("random_bump(")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown data preset {s:?}")))?;
        let seed = seed
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad random_bump seed {seed:?}")))?;
        Ok(DataSource::RandomBump(Some(seed)))
    }
}

/// `f(-x)`. Grid nodes are symmetric except the first, which maps to
/// itself by periodicity.
pub fn reflect(f: &Field) -> Field {
    let grid = *f.grid();
    let n = grid.points();
    let dim = grid.dim();
    let mut idx = [0usize; 4];
    let samples = (0..grid.len())
        .map(|k| {
            grid.unravel(k, &mut idx[..dim]);
            let flat = idx[..dim].iter().fold(0, |acc, &j| acc * n + (n - j) % n);
            f.samples()[flat]
        })
        .collect();
    let out = Field::new(grid, samples).expect("reflection keeps the sample count");
    if f.is_nonnegative() {
        out.into_nonnegative(0.0).expect("already nonnegative")
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn presets_parse_and_print() {
        for s in ["gaussian", "two_bump", "random_bump", "random_bump(7)", "file:data/x.bin"] {
            let d: DataSource = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("random_bump(x)".parse::<DataSource>().is_err());
        assert!("sombrero".parse::<DataSource>().is_err());
    }

    #[test]
    fn json_shape() {
        let d: DataSource = serde_json::from_str(r#"{"random_bump": 7}"#).unwrap();
        assert_eq!(d, DataSource::RandomBump(Some(7)));
        let d: DataSource = serde_json::from_str(r#""two_bump""#).unwrap();
        assert_eq!(d, DataSource::TwoBump);
    }

    #[test]
    fn gaussian_has_unit_norm_and_bumps_are_seeded() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = DataSource::Gaussian.build(&g, 0).unwrap();
        assert!((f.lq_norm(2.0).unwrap() - 1.0).abs() < 1e-12);
        let a = DataSource::RandomBump(Some(3)).build(&g, 0).unwrap();
        let b = DataSource::RandomBump(None).build(&g, 3).unwrap();
        let c = DataSource::RandomBump(Some(4)).build(&g, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.max_abs_diff(&c).unwrap() > 1e-3);
        assert!(a.is_nonnegative());
    }

    #[test]
    fn files_load_in_both_formats() {
        use crate::fields::io::{encode_binary, encode_csv};
        let g = make_grid(1, 4.0, 32).unwrap();
        let f = DataSource::TwoBump.build(&g, 0).unwrap();
        let dir = std::env::temp_dir().join(format!("strichartz-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let bin = dir.join("f.bin");
        let csv = dir.join("f.csv");
        std::fs::write(&bin, encode_binary(&f)).unwrap();
        std::fs::write(&csv, encode_csv(&f).unwrap()).unwrap();
        for path in [bin, csv] {
            let back = DataSource::File(path).build(&g, 0).unwrap();
            assert!(back.max_abs_diff(&f).unwrap() < 1e-15);
        }
        let other = make_grid(1, 4.0, 64).unwrap();
        assert!(DataSource::File(dir.join("f.bin")).build(&other, 0).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = make_grid(2, 8.0, 32).unwrap();
        let f = DataSource::TwoBump.build(&g, 0).unwrap();
        let r = reflect(&f);
        assert_eq!(reflect(&r), f);
        // node (14, 17) is x = (-1, 0.5) and (18, 15) is -x
        assert_eq!(r.samples()[18 * 32 + 15], f.samples()[14 * 32 + 17]);
    }
}
