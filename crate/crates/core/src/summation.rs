//! Error-compensated accumulation (Kahan-Babuska / Neumaier).

use std::ops::AddAssign;

use crate::Vec3;

/// Running sum with a separate compensation term.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new(value: f64) -> Self {
        Self {
            sum: value,
            carry: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sum of a slice with compensation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// Componentwise compensated accumulator for a 3-vector.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CompensatedVec3 {
    parts: [CompensatedSum; 3],
}

impl CompensatedVec3 {
    pub fn new(v: Vec3) -> Self {
        Self {
            parts: [
                CompensatedSum::new(v.x),
                CompensatedSum::new(v.y),
                CompensatedSum::new(v.z),
            ],
        }
    }

    pub fn add(&mut self, dv: &Vec3) {
        for (p, d) in self.parts.iter_mut().zip(dv.iter()) {
            p.add(*d);
        }
    }

    pub fn value(&self) -> Vec3 {
        Vec3::new(
            self.parts[0].value(),
            self.parts[1].value(),
            self.parts[2].value(),
        )
    }
}
