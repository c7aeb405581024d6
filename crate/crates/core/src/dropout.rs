use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Dropout rates for the four places the model drops activations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    pub embedding: f64,
    pub lstm: f64,
    pub arc_mlp: f64,
    pub label_mlp: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        DropoutRates {
            embedding: 0.33,
            lstm: 0.33,
            arc_mlp: 0.33,
            label_mlp: 0.33,
        }
    }
}

impl DropoutRates {
    pub fn none() -> Self {
        DropoutRates {
            embedding: 0.0,
            lstm: 0.0,
            arc_mlp: 0.0,
            label_mlp: 0.0,
        }
    }
}

/// Source of dropout keep-masks. In evaluation mode no masks are drawn and
/// dropout is the identity; in training mode masks come from a seeded
/// generator owned by the caller, so a pass can be replayed exactly.
#[derive(Clone, Debug)]
pub struct Dropout {
    rates: DropoutRates,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn eval() -> Self {
        Dropout {
            rates: DropoutRates::none(),
            rng: None,
        }
    }

    pub fn train(rates: DropoutRates, seed: u64) -> Self {
        Dropout {
            rates,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn rates(&self) -> DropoutRates {
        self.rates
    }

    /// A keep-mask of `len` entries for rate `p`, or `None` when nothing
    /// should be dropped.
    pub fn mask(&mut self, p: f64, len: usize) -> Option<Vec<bool>> {
        let rng = self.rng.as_mut()?;
        if p <= 0.0 {
            return None;
        }
        Some((0..len).map(|_| !rng.random_bool(p)).collect())
    }
}
