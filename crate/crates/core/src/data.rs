// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two interleaving half-moons with Gaussian noise, plus seeded splits.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GigError, Result};

/// Label of the upper moon.
pub const UPPER: usize = 1;
/// Label of the lower moon.
pub const LOWER: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    /// Writes `x0,x1,label` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x0", "x1", "label"])?;
        for (p, y) in self.points.iter().zip(&self.labels) {
            w.write_record([format!("{:.16e}", p[0]), format!("{:.16e}", p[1]), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for row in r.deserialize() {
            let (x0, x1, label): (f64, f64, usize) = row?;
            points.push(vec![x0, x1]);
            labels.push(label);
        }
        Ok(Dataset {
            points,
            labels,
            noise_sigma: f64::NAN,
            seed: 0,
        })
    }
}

/// Upper moon arc `(cos t, sin t)`.
pub fn upper_arc(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Lower moon arc `(1 - cos t, 0.5 - sin t)`.
pub fn lower_arc(theta: f64) -> [f64; 2] {
    [1.0 - theta.cos(), 0.5 - theta.sin()]
}

fn linspace_pi(count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| {
        if count == 1 {
            0.0
        } else {
            PI * i as f64 / (count - 1) as f64
        }
    })
}

/// `n` points: `ceil(n/2)` on the upper moon (label 1), `floor(n/2)` on the
/// lower moon (label 0), angles evenly spaced on `[0, pi]`, then isotropic
/// Gaussian noise of standard deviation `noise_sigma` on both coordinates.
///
/// Points are ordered upper moon first; use [`split`] to shuffle.
pub fn make_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(GigError::Argument(format!("need at least 2 points, got {n}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(GigError::Argument(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let n_upper = n.div_ceil(2);
    let n_lower = n / 2;
    let mut points: Vec<Vec<f64>> = linspace_pi(n_upper)
        .map(upper_arc)
        .chain(linspace_pi(n_lower).map(lower_arc))
        .map(|p| p.to_vec())
        .collect();
    let labels = std::iter::repeat(UPPER)
        .take(n_upper)
        .chain(std::iter::repeat(LOWER).take(n_lower))
        .collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| GigError::Argument(e.to_string()))?;
        for p in &mut points {
            for v in p.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(Dataset {
        points,
        labels,
        noise_sigma,
        seed,
    })
}

/// Shuffled split into `floor(n * train_fraction)` training points and the rest.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(GigError::Argument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(GigError::Argument(format!(
            "split of {n} points at fraction {train_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n_train);
    Ok((ds.subset(train), ds.subset(test)))
}
