use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Multi-task loss weight used by the phoneme-decoder variant.
pub const MTL_LAMBDA: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// No melody input.
    B1,
    /// No instance norm and no skip connections.
    B2,
    /// Instance norm before every up/down-sampling layer as well.
    AllNorm,
    /// Full network, MSE only.
    PMse,
    /// Full network with the phoneme decoder and multi-task loss.
    PMtl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantFlags {
    pub use_contour: bool,
    pub use_in: bool,
    pub use_skips: bool,
    pub use_dp: bool,
    pub all_norm: bool,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::B1,
        Variant::B2,
        Variant::AllNorm,
        Variant::PMse,
        Variant::PMtl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::B1 => "B1",
            Variant::B2 => "B2",
            Variant::AllNorm => "AllNorm",
            Variant::PMse => "P-MSE",
            Variant::PMtl => "P-MTL",
        }
    }

    pub fn flags(self) -> VariantFlags {
        let full = VariantFlags {
            use_contour: true,
            use_in: true,
            use_skips: true,
            use_dp: false,
            all_norm: false,
        };
        match self {
            Variant::B1 => VariantFlags {
                use_contour: false,
                ..full
            },
            Variant::B2 => VariantFlags {
                use_in: false,
                use_skips: false,
                ..full
            },
            Variant::AllNorm => VariantFlags {
                all_norm: true,
                ..full
            },
            Variant::PMse => full,
            Variant::PMtl => VariantFlags {
                use_dp: true,
                ..full
            },
        }
    }

    /// Default multi-task weight; zero selects pure MSE training.
    pub fn lambda(self) -> f64 {
        match self {
            Variant::PMtl => MTL_LAMBDA,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "b1" => Ok(Variant::B1),
            "b2" => Ok(Variant::B2),
            "allnorm" => Ok(Variant::AllNorm),
            "pmse" => Ok(Variant::PMse),
            "pmtl" => Ok(Variant::PMtl),
            _ => Err(Error::Config(format!(
                "unknown variant `{s}` (expected B1, B2, AllNorm, P-MSE or P-MTL)"
            ))),
        }
    }
}
