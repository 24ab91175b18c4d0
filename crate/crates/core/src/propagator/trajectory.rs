use std::io::Write;

use super::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{CascadeState, HilbertSpace, C64};

/// What to keep at each recorded time.
#[derive(Clone, Debug, PartialEq)]
pub enum Recording {
    Full,
    /// Only the listed (row, column) elements; keeps long sweeps memory-bounded.
    Elements(Vec<(usize, usize)>),
}

#[derive(Clone, Debug)]
pub enum Samples {
    Full(Vec<DensityMatrix>),
    Elements {
        pairs: Vec<(usize, usize)>,
        values: Vec<Vec<C64>>,
    },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    space: HilbertSpace,
    times: Vec<f64>,
    samples: Samples,
}

impl Trajectory {
    pub(crate) fn new(space: HilbertSpace, times: Vec<f64>, samples: Samples) -> Self {
        Self { space, times, samples }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    /// Full state at sample `k`, when recorded in full.
    pub fn state(&self, k: usize) -> Option<&DensityMatrix> {
        match &self.samples {
            Samples::Full(v) => v.get(k),
            Samples::Elements { .. } => None,
        }
    }

    pub fn last_state(&self) -> Option<&DensityMatrix> {
        self.state(self.len().checked_sub(1)?)
    }

    pub fn element(&self, k: usize, i: usize, j: usize) -> Option<C64> {
        match &self.samples {
            Samples::Full(v) => v.get(k).map(|r| r.get(i, j)),
            Samples::Elements { pairs, values } => {
                let col = pairs.iter().position(|&p| p == (i, j))?;
                values.get(k).map(|row| row[col])
            }
        }
    }

    /// CSV with a time column and one column per element; coherences get
    /// re/im pairs.
    pub fn write_csv<W: Write>(&self, mut w: W, pairs: &[(usize, usize)]) -> Result<()> {
        let name = |i: usize| {
            let (l, n) = self.space.state(i);
            format!("{}{}", l.label(), n)
        };
        let mut header = vec!["time".to_string()];
        for &(i, j) in pairs {
            if i == j {
                header.push(format!("rho_{}_{}", name(i), name(j)));
            } else {
                header.push(format!("re_rho_{}_{}", name(i), name(j)));
                header.push(format!("im_rho_{}_{}", name(i), name(j)));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            for &(i, j) in pairs {
                let z = self
                    .element(k, i, j)
                    .ok_or_else(|| Error::MissingElement(format!("({i},{j})")))?;
                if i == j {
                    row.push(format!("{:e}", z.re));
                } else {
                    row.push(format!("{:e}", z.re));
                    row.push(format!("{:e}", z.im));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Population time series of the states plotted for the two-pulse run.
#[derive(Clone, Debug, Default)]
pub struct PopulationSeries {
    pub times: Vec<f64>,
    pub metastable: Vec<f64>,
    pub biexciton: Vec<f64>,
    pub ground: Vec<f64>,
    pub y_one: Vec<f64>,
    pub g_two: Vec<f64>,
}

/// Diagonal elements every population series needs.
pub fn population_pairs(space: &HilbertSpace) -> Vec<(usize, usize)> {
    [
        CascadeState::M,
        CascadeState::U,
        CascadeState::GZero,
        CascadeState::YOne,
        CascadeState::GTwo,
    ]
    .iter()
    .map(|&c| {
        let i = space.cascade_index(c);
        (i, i)
    })
    .collect()
}

/// (rho_mm, rho_uu, rho_gg, rho_YY, rho_G'G') per sample, where |g> is |g,0>.
pub fn populations(traj: &Trajectory) -> Result<PopulationSeries> {
    let pairs = population_pairs(traj.space());
    let mut out = PopulationSeries {
        times: traj.times().to_vec(),
        ..Default::default()
    };
    for k in 0..traj.len() {
        let mut vals = [0.0; 5];
        for (v, &(i, j)) in vals.iter_mut().zip(&pairs) {
            *v = traj
                .element(k, i, j)
                .ok_or_else(|| Error::MissingElement(format!("population ({i},{i})")))?
                .re;
        }
        out.metastable.push(vals[0]);
        out.biexciton.push(vals[1]);
        out.ground.push(vals[2]);
        out.y_one.push(vals[3]);
        out.g_two.push(vals[4]);
    }
    Ok(out)
}
