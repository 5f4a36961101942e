use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LayerDescr {
    Conv {
        h_out: u64,
        w_out: u64,
        c_out: u64,
        k: u64,
        c_in: u64,
    },
    Linear {
        m: u64,
        n: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlopMode {
    Plain,
    /// Training with factors: adds one product `m ⊙ w` per weight.
    SignInTraining,
    /// Merged weights; identical to `Plain`.
    Inference,
}

/// Forward FLOPs of one layer.
///
/// Convolution: `2·H·W·C_out·K²·C_in + C_out·C_in·K²`; linear: `2·m·n`.
/// Sign-In training adds one weight-sized term (`C_out·C_in·K²` or `m·n`).
pub fn flop_count(layer: LayerDescr, mode: FlopMode) -> Result<u64> {
    let (base, weights) = match layer {
        LayerDescr::Conv {
            h_out,
            w_out,
            c_out,
            k,
            c_in,
        } => {
            if [h_out, w_out, c_out, k, c_in].contains(&0) {
                return Err(Error::invalid("layer", "dimensions must be positive"));
            }
            let weights = c_out * c_in * k * k;
            (2 * h_out * w_out * weights + weights, weights)
        }
        LayerDescr::Linear { m, n } => {
            if m == 0 || n == 0 {
                return Err(Error::invalid("layer", "dimensions must be positive"));
            }
            (2 * m * n, m * n)
        }
    };
    Ok(match mode {
        FlopMode::Plain | FlopMode::Inference => base,
        FlopMode::SignInTraining => base + weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conv() {
        let c = LayerDescr::Conv {
            h_out: 1,
            w_out: 1,
            c_out: 1,
            k: 1,
            c_in: 1,
        };
        assert_eq!(flop_count(c, FlopMode::Plain).unwrap(), 3);
        assert_eq!(flop_count(c, FlopMode::SignInTraining).unwrap(), 4);
        assert_eq!(flop_count(c, FlopMode::Inference).unwrap(), 3);
    }

    #[test]
    fn linear() {
        let l = LayerDescr::Linear { m: 10, n: 10 };
        assert_eq!(flop_count(l, FlopMode::Plain).unwrap(), 200);
        assert_eq!(flop_count(l, FlopMode::SignInTraining).unwrap(), 300);
    }
}
