use crate::{Error, Result, Vec3};

pub const SUPPORTED_SAMPLE_COUNTS: [usize; 5] = [1, 4, 10, 20, 35];

/// Factor pulling lattice points toward the centroid so none sits on a face.
const SHRINK: f64 = 0.999;

/// Equal-weight interior sample points of a tetrahedron, stored as
/// barycentric coordinates.
///
/// For `n = 1` the single point is the centroid. For `n = 4, 10, 20, 35` the
/// points are the barycentric lattice `(i0, i1, i2, i3) / (k + 4)` with every
/// `i ≥ 1` and `Σ i = k + 4` (`k = 1..=4`), shrunk slightly toward the
/// centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    bary: Vec<[f64; 4]>,
}

impl QuadratureRule {
    pub fn new(n: usize) -> Result<Self> {
        let k = match n {
            1 => return Ok(Self { bary: vec![[0.25; 4]] }),
            4 => 1,
            10 => 2,
            20 => 3,
            35 => 4,
            _ => return Err(Error::UnsupportedSampleCount(n)),
        };
        let s = k + 4;
        let mut bary = Vec::with_capacity(n);
        for a in 1..s {
            for b in 1..s {
                for c in 1..s {
                    if a + b + c >= s {
                        continue;
                    }
                    let d = s - a - b - c;
                    let l = [a, b, c, d].map(|i| 0.25 + SHRINK * (i as f64 / s as f64 - 0.25));
                    bary.push(l);
                }
            }
        }
        debug_assert_eq!(bary.len(), n);
        Ok(Self { bary })
    }

    pub fn len(&self) -> usize {
        self.bary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bary.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.bary.len() as f64
    }

    pub fn barycentric(&self) -> &[[f64; 4]] {
        &self.bary
    }

    pub fn points<'a>(&'a self, v: &'a [Vec3; 4]) -> impl Iterator<Item = Vec3> + 'a {
        self.bary
            .iter()
            .map(move |l| v[0] * l[0] + v[1] * l[1] + v[2] * l[2] + v[3] * l[3])
    }
}

/// `n` equal-weight (`1/n`) sample points strictly inside the tet `v`.
pub fn quadrature_samples(v: &[Vec3; 4], n: usize) -> Result<Vec<Vec3>> {
    let rule = QuadratureRule::new(n)?;
    Ok(rule.points(v).collect())
}
