use std::collections::BTreeMap;
use std::sync::Arc;

use super::{FieldError, HamiltonianSystem, Rect, Sigma};
use crate::poly::Poly2;

/// A named Hamiltonian shipped with the library.
pub trait BuiltinHamiltonian: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn polynomial(&self) -> Poly2;
    fn default_box(&self) -> Rect;
}

struct Harmonic;

impl BuiltinHamiltonian for Harmonic {
    fn name(&self) -> &'static str {
        "harmonic"
    }
    fn describe(&self) -> &'static str {
        "H = (x² + y²)/2"
    }
    fn polynomial(&self) -> Poly2 {
        Poly2::new([(2, 0, 0.5), (0, 2, 0.5)])
    }
    fn default_box(&self) -> Rect {
        Rect::new(-3.0, 3.0, -3.0, 3.0)
    }
}

struct DoubleWell;

impl BuiltinHamiltonian for DoubleWell {
    fn name(&self) -> &'static str {
        "doublewell"
    }
    fn describe(&self) -> &'static str {
        "H = (x² − 1)²/4 + y²/2"
    }
    fn polynomial(&self) -> Poly2 {
        Poly2::new([(4, 0, 0.25), (2, 0, -0.5), (0, 0, 0.25), (0, 2, 0.5)])
    }
    fn default_box(&self) -> Rect {
        Rect::new(-2.5, 2.5, -2.5, 2.5)
    }
}

struct CanonicalSaddle;

impl BuiltinHamiltonian for CanonicalSaddle {
    fn name(&self) -> &'static str {
        "canonical_saddle"
    }
    fn describe(&self) -> &'static str {
        "H = x² − y² (local chart tests only; not globally admissible)"
    }
    fn polynomial(&self) -> Poly2 {
        Poly2::new([(2, 0, 1.0), (0, 2, -1.0)])
    }
    fn default_box(&self) -> Rect {
        Rect::new(-1.0, 1.0, -1.0, 1.0)
    }
}

struct FourSaddles;

impl BuiltinHamiltonian for FourSaddles {
    fn name(&self) -> &'static str {
        "four_saddles"
    }
    fn describe(&self) -> &'static str {
        "H = (x² − 1)²/4 + (y² − 1)²/4 (saddles share one level)"
    }
    fn polynomial(&self) -> Poly2 {
        Poly2::new([
            (4, 0, 0.25),
            (2, 0, -0.5),
            (0, 4, 0.25),
            (0, 2, -0.5),
            (0, 0, 0.5),
        ])
    }
    fn default_box(&self) -> Rect {
        Rect::new(-2.5, 2.5, -2.5, 2.5)
    }
}

struct MexicanHat;

impl BuiltinHamiltonian for MexicanHat {
    fn name(&self) -> &'static str {
        "mexican_hat"
    }
    fn describe(&self) -> &'static str {
        "H = (x² + y² − 1)² (circle of minima, not Morse)"
    }
    fn polynomial(&self) -> Poly2 {
        Poly2::new([
            (4, 0, 1.0),
            (0, 4, 1.0),
            (2, 2, 2.0),
            (2, 0, -2.0),
            (0, 2, -2.0),
            (0, 0, 1.0),
        ])
    }
    fn default_box(&self) -> Rect {
        Rect::new(-2.0, 2.0, -2.0, 2.0)
    }
}

/// Name → built-in Hamiltonian lookup.
#[derive(Clone)]
pub struct SystemRegistry {
    entries: BTreeMap<&'static str, Arc<dyn BuiltinHamiltonian>>,
}

impl Default for SystemRegistry {
    fn default() -> Self {
        let mut r = SystemRegistry { entries: BTreeMap::new() };
        r.register(Arc::new(Harmonic));
        r.register(Arc::new(DoubleWell));
        r.register(Arc::new(CanonicalSaddle));
        r.register(Arc::new(FourSaddles));
        r.register(Arc::new(MexicanHat));
        r
    }
}

impl SystemRegistry {
    pub fn register(&mut self, h: Arc<dyn BuiltinHamiltonian>) {
        self.entries.insert(h.name(), h);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn BuiltinHamiltonian>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    /// Built-in with identity σ (l = 2) and its default box.
    pub fn build(&self, name: &str) -> Result<HamiltonianSystem, FieldError> {
        let b = self
            .get(name)
            .ok_or_else(|| FieldError::UnknownBuiltin(name.to_string()))?;
        Ok(HamiltonianSystem::new(
            b.name(),
            b.polynomial(),
            Sigma::Identity(2),
            b.default_box(),
        ))
    }
}
