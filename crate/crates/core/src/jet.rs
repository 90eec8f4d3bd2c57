/// Value, first derivative and Schwarzian derivative of a ray map at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub deriv: f64,
    pub schwarzian: f64,
}

impl Jet {
    pub fn identity(u: f64) -> Self {
        Jet {
            value: u,
            deriv: 1.0,
            schwarzian: 0.0,
        }
    }

    /// Jet of `outer ∘ inner`, where `outer` was evaluated at `self.value`.
    ///
    /// `(F∘G)' = G'·F'∘G` and `S(F∘G) = SG + G'²·(SF)∘G`.
    pub fn then(self, outer: Jet) -> Jet {
        Jet {
            value: outer.value,
            deriv: self.deriv * outer.deriv,
            schwarzian: self.schwarzian + self.deriv * self.deriv * outer.schwarzian,
        }
    }

    /// Jet of the inverse map at `self.value`, given the jet of the map at its
    /// preimage `preimage`.
    pub fn inverted(self, preimage: f64) -> Jet {
        let d = self.deriv;
        Jet {
            value: preimage,
            deriv: 1.0 / d,
            schwarzian: -self.schwarzian / (d * d),
        }
    }
}
