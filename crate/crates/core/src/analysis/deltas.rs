use crate::analysis::potential::omega;
use crate::error::Result;
use crate::linesearch::WolfeParams;

/// Line-search dependent constants of the superlinear analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub d7: f64,
    pub d8: f64,
}

impl DeltaConstants {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        WolfeParams::new(alpha, beta)?;
        let r2a = (2.0 * (1.0 - alpha)).sqrt();
        let rb = 1.0 / (1.0 - beta).sqrt();
        let d1 = (1.0 / 6.0_f64).min(r2a - 1.0).min(rb - 1.0);
        let d2 = (7.0 / 8.0_f64).max(1.0 / r2a);
        let d3 = rb;
        let d4 = 1.0 / omega(d2 - 1.0)?.min(omega(d3 - 1.0)?);
        let gap = 2.0 * d2 - 1.0 - d1;
        let d5 = (2.0 + 2.0 / d2).max(4.0 * d3) / gap;
        let d6 = (1.0 / (2.0 * alpha * (1.0 - beta))).ln();
        let d7 = 1.0 + d4 * d6 + d5;
        let d8 = 1.0 + 2.0 * d7 + (2.0 * d2 - d1 - d2.ln()) / gap;
        Ok(Self {
            d1,
            d2,
            d3,
            d4,
            d5,
            d6,
            d7,
            d8,
        })
    }

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.d1, self.d2, self.d3, self.d4, self.d5, self.d6, self.d7, self.d8,
        ]
    }
}

/// Published integer-rounded reference values for `alpha = 1/4, beta = 3/4`.
pub const TABLE_QUARTER: [f64; 8] = [
    1.0 / 6.0,
    7.0 / 8.0,
    2.0,
    118.0,
    14.0,
    2.079_441_541_679_836,
    260.0,
    524.0,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_values_match_independent_oracle() {
        let d = DeltaConstants::new(0.25, 0.75).unwrap();
        let oracle = [
            0.166_666_666_666_666_67,
            0.875,
            2.0,
            117.214_157_642_399_6,
            13.714_285_714_285_714,
            2.079_441_541_679_836,
            258.454_274_388_900_46,
            520.851_745_450_871_5,
        ];
        for (got, want) in d.as_array().iter().zip(oracle) {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn d3_depends_only_on_beta() {
        let a = DeltaConstants::new(0.1, 0.8).unwrap();
        let b = DeltaConstants::new(0.3, 0.8).unwrap();
        assert_eq!(a.d3, b.d3);
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(DeltaConstants::new(0.4, 0.3).is_err());
    }
}
