//! Problem-instance definitions shared by every solver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Endpoint data of a double-integrator transfer on the unit horizon `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryConditions {
    /// Initial position.
    pub s0: f64,
    /// Final position.
    pub sf: f64,
    /// Initial velocity.
    pub v0: f64,
    /// Final velocity.
    pub vf: f64,
}

impl BoundaryConditions {
    pub fn new(s0: f64, sf: f64, v0: f64, vf: f64) -> Result<Self> {
        let bc = BoundaryConditions { s0, sf, v0, vf };
        if bc.as_array().iter().all(|v| v.is_finite()) {
            Ok(bc)
        } else {
            Err(Error::invalid(format!(
                "boundary conditions must be finite, got {bc}"
            )))
        }
    }

    /// The running example: unit initial speed, back to rest at the start position.
    pub const fn particular() -> Self {
        BoundaryConditions {
            s0: 0.0,
            sf: 0.0,
            v0: 1.0,
            vf: 0.0,
        }
    }

    pub fn is_particular(&self) -> bool {
        *self == Self::particular()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s0, self.sf, self.v0, self.vf]
    }

    /// Required mean control, `vf - v0`.
    pub fn velocity_change(&self) -> f64 {
        self.vf - self.v0
    }

    /// `sf - s0 - v0`: position change not explained by coasting.
    pub fn position_excess(&self) -> f64 {
        self.sf - self.s0 - self.v0
    }

    /// Signed imbalance `K` between the two terminal requirements. A constant
    /// control `vf - v0` is feasible iff `K == 0`; the minimum-energy control
    /// has slope `-12 K`.
    pub fn imbalance(&self) -> f64 {
        self.position_excess() - 0.5 * self.velocity_change()
    }

    pub fn scale(&self) -> f64 {
        self.as_array().iter().fold(1.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::particular()
    }
}

impl fmt::Display for BoundaryConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.s0, self.sf, self.v0, self.vf)
    }
}

/// Parses `s0,sf,v0,vf`.
impl FromStr for BoundaryConditions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad boundary value {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match values.as_slice() {
            &[s0, sf, v0, vf] => BoundaryConditions::new(s0, sf, v0, vf),
            _ => Err(Error::invalid(format!(
                "expected four comma-separated values s0,sf,v0,vf, got {s:?}"
            ))),
        }
    }
}

impl<'de> Deserialize<'de> for BoundaryConditions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            s0: f64,
            sf: f64,
            v0: f64,
            vf: f64,
        }
        let r = Raw::deserialize(d)?;
        BoundaryConditions::new(r.s0, r.sf, r.v0, r.vf).map_err(serde::de::Error::custom)
    }
}

/// Trade-off weight on the total-variation term. `+inf` is a valid value and
/// selects the pure total-variation limit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Weight(f64);

impl Weight {
    pub const ZERO: Weight = Weight(0.0);
    pub const INFINITY: Weight = Weight(f64::INFINITY);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            Err(Error::invalid(format!(
                "weight must be nonnegative, got {alpha}"
            )))
        } else {
            Ok(Weight(alpha))
        }
    }

    /// Maps a convex-combination weight `a1` in `(0, 1]` on the energy term to
    /// the equivalent `alpha = (1 - a1) / a1`.
    pub fn from_energy_share(a1: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1 <= 1.0) {
            return Err(Error::invalid(format!(
                "energy share must lie in (0, 1], got {a1}"
            )));
        }
        Weight::new((1.0 - a1) / a1)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_finite_positive(self) -> bool {
        self.0 > 0.0 && self.0.is_finite()
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(Weight::INFINITY),
            _ => t
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad weight {s:?}: {e}")))
                .and_then(Weight::new),
        }
    }
}

/// Finite weights serialize as numbers, the infinite sentinel as `"inf"`.
impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Weight::new(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_bc() {
        let bc: BoundaryConditions = "0, 0,1,0".parse().unwrap();
        assert!(bc.is_particular());
        assert!("0,0,1".parse::<BoundaryConditions>().is_err());
        assert!("0,0,nan,0".parse::<BoundaryConditions>().is_err());
        assert!("0,0,x,0".parse::<BoundaryConditions>().is_err());
    }

    #[test]
    fn imbalance_of_particular_instance() {
        assert_eq!(BoundaryConditions::particular().imbalance(), -0.5);
        assert_eq!(
            BoundaryConditions::new(0.0, 0.0, 0.0, 0.0)
                .unwrap()
                .imbalance(),
            0.0
        );
    }

    #[test]
    fn weight_parsing_and_serde() {
        assert!("inf".parse::<Weight>().unwrap().is_infinite());
        assert_eq!("0.589".parse::<Weight>().unwrap().value(), 0.589);
        assert!("-1".parse::<Weight>().is_err());
        assert!(Weight::new(f64::NAN).is_err());

        let json = serde_json::to_string(&[Weight::INFINITY, Weight::new(0.5).unwrap()]).unwrap();
        assert_eq!(json, r#"["inf",0.5]"#);
        let back: Vec<Weight> = serde_json::from_str(&json).unwrap();
        assert!(back[0].is_infinite());
        assert_eq!(back[1].value(), 0.5);
    }

    #[test]
    fn energy_share_map() {
        assert_eq!(Weight::from_energy_share(1.0).unwrap(), Weight::ZERO);
        assert_eq!(Weight::from_energy_share(0.5).unwrap().value(), 1.0);
        assert!(Weight::from_energy_share(0.0).is_err());
    }
}
