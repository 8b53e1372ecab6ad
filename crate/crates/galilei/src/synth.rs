//! Seeded random generators for structures, observers, connections and
//! admissible connection data.
//!
//! The structure generator is constructive: it picks a spatial frame
//! `e_a = M_{ab} (d/dx^b + g_b d/dt)` with `M` close to the identity and
//! small polynomial perturbations, sets `h = sum_a e_a (x) e_a` and
//! `tau = dt - g_b dx^b`. This makes `tau(e_a) = 0` and hence
//! `tau_mu h^{mu nu} = 0` hold as polynomial identities, `h` positive
//! semidefinite of rank `n` on the sample box, and keeps every component a
//! polynomial of small degree. Observers are built the same way so that
//! `tau(v) = 1` cancels exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connection::{Connection, ConnectionData};
use crate::expr::ScalarExpr;
use crate::structure::{GalileiStructure, Observer};
use crate::tensor::{TensorField, Variance};

use Variance::{Down, Up};

pub struct Synth {
    rng: ChaCha8Rng,
}

impl Synth {
    pub fn new(seed: u64) -> Self {
        Synth {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Random monomial of degree <= `degree` in `dim` coordinates.
    fn monomial(&mut self, dim: usize, degree: u32, amplitude: f64) -> ScalarExpr {
        let coefficient = self.rng.gen_range(-amplitude..amplitude);
        let mut expr = ScalarExpr::constant(coefficient, dim);
        let deg = self.rng.gen_range(0..=degree);
        for _ in 0..deg {
            let coord = ScalarExpr::coord(self.rng.gen_range(0..dim), dim);
            expr = expr.mul(&coord);
        }
        expr
    }

    /// Random polynomial: one or two monomials of degree <= `degree`.
    pub fn polynomial(&mut self, dim: usize, degree: u32, amplitude: f64) -> ScalarExpr {
        let terms = self.rng.gen_range(1..=2);
        let mut expr = self.monomial(dim, degree, amplitude);
        for _ in 1..terms {
            expr = expr.add(&self.monomial(dim, degree, amplitude));
        }
        expr
    }

    /// Random Galilei structure with an exactly-unit observer.
    ///
    /// All components are polynomials of degree <= 3; validity holds on the
    /// default sample box by coefficient control (the spatial frame matrix
    /// stays diagonally dominant).
    pub fn structure(&mut self, dim: usize) -> (GalileiStructure, Observer) {
        let (structure, observer, _) = self.structure_with_frame(dim);
        (structure, observer)
    }

    /// Like [`Synth::structure`], also returning the spatial frame legs the
    /// metric was assembled from: `(v, e_1 .. e_n)` is a Galilei frame by
    /// construction.
    pub fn structure_with_frame(
        &mut self,
        dim: usize,
    ) -> (GalileiStructure, Observer, Vec<TensorField>) {
        assert!((2..=5).contains(&dim), "generator tuned for dim 2..=5");
        let n = dim - 1;

        // g_b: clock tilt; m: spatial frame perturbation; w_b: observer boost.
        let tilt: Vec<ScalarExpr> = (0..n).map(|_| self.polynomial(dim, 2, 0.15)).collect();
        let mut frame = vec![vec![ScalarExpr::zero(dim); n]; n];
        for (a, row) in frame.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let perturbation = self.monomial(dim, 2, 0.12 / n as f64);
                *entry = if a == b {
                    ScalarExpr::one(dim).add(&perturbation)
                } else {
                    perturbation
                };
            }
        }
        let boost: Vec<ScalarExpr> = (0..n).map(|_| self.polynomial(dim, 2, 0.3)).collect();

        // tau = dt - g_b dx^b
        let tau = TensorField::from_fn(dim, &[Down], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim)
            } else {
                tilt[idx[0] - 1].neg()
            }
        });

        // e_a = M_{ab} (d/dx^b + g_b d/dt): tau(e_a) = 0 exactly.
        let mut vectors = Vec::with_capacity(n);
        for a in 0..n {
            let mut time_component = ScalarExpr::zero(dim);
            for b in 0..n {
                time_component = time_component.add(&frame[a][b].mul(&tilt[b]));
            }
            let field = TensorField::from_fn(dim, &[Up], |idx| {
                if idx[0] == 0 {
                    time_component.clone()
                } else {
                    frame[a][idx[0] - 1].clone()
                }
            });
            vectors.push(field);
        }

        let h = TensorField::from_fn(dim, &[Up, Up], |idx| {
            let mut acc = ScalarExpr::zero(dim);
            for e in &vectors {
                acc = acc.add(&e.component(&[idx[0]]).mul(e.component(&[idx[1]])));
            }
            acc
        });

        // v = (1 + g_b w_b) d/dt + w_b d/dx^b: tau(v) = 1 exactly.
        let mut pairing = ScalarExpr::zero(dim);
        for b in 0..n {
            pairing = pairing.add(&tilt[b].mul(&boost[b]));
        }
        let v = TensorField::from_fn(dim, &[Up], |idx| {
            if idx[0] == 0 {
                ScalarExpr::one(dim).add(&pairing)
            } else {
                boost[idx[0] - 1].clone()
            }
        });

        let structure = GalileiStructure::new(tau, h).expect("generated structure is well-formed");
        let observer = Observer::new(v).expect("generated observer is well-formed");
        let mut frame_legs = vec![observer.velocity().clone()];
        frame_legs.extend(vectors);
        (structure, observer, frame_legs)
    }

    /// Random connection with polynomial coefficients of degree <= 2.
    pub fn connection(&mut self, dim: usize, amplitude: f64) -> Connection {
        let coefficients: Vec<ScalarExpr> = (0..dim * dim * dim)
            .map(|_| self.polynomial(dim, 2, amplitude))
            .collect();
        Connection::from_fn(dim, |rho, mu, nu| {
            coefficients[(rho * dim + mu) * dim + nu].clone()
        })
    }

    /// Random admissible connection data for `(structure, observer)`: the
    /// constrained slots are made spacelike by projecting with `P`, the
    /// declared (anti)symmetries by explicit (anti)symmetrization.
    pub fn connection_data(
        &mut self,
        structure: &GalileiStructure,
        observer: &Observer,
        amplitude: f64,
    ) -> ConnectionData {
        let dim = structure.dim();
        let projector = structure.spatial_projector(observer);

        let raw: Vec<ScalarExpr> = (0..dim * dim * dim)
            .map(|_| self.polynomial(dim, 2, amplitude))
            .collect();
        let spatial_torsion = TensorField::from_fn(dim, &[Up, Down, Down], |idx| {
            let (rho, mu, nu) = (idx[0], idx[1], idx[2]);
            let mut acc = ScalarExpr::zero(dim);
            for lambda in 0..dim {
                let anti = raw[(lambda * dim + mu) * dim + nu]
                    .sub(&raw[(lambda * dim + nu) * dim + mu])
                    .scale(0.5);
                acc = acc.add(&projector.component(&[rho, lambda]).mul(&anti));
            }
            acc
        });

        let clock_nonmetricity = TensorField::from_fn(dim, &[Down, Down], |_| {
            self.polynomial(dim, 2, amplitude)
        });

        let raw: Vec<ScalarExpr> = (0..dim * dim * dim)
            .map(|_| self.polynomial(dim, 2, amplitude))
            .collect();
        let spatial_nonmetricity = TensorField::from_fn(dim, &[Down, Up, Up], |idx| {
            let (rho, mu, nu) = (idx[0], idx[1], idx[2]);
            let mut acc = ScalarExpr::zero(dim);
            for kappa in 0..dim {
                for lambda in 0..dim {
                    let sym = raw[(rho * dim + kappa) * dim + lambda]
                        .add(&raw[(rho * dim + lambda) * dim + kappa])
                        .scale(0.5);
                    acc = acc.add(
                        &projector
                            .component(&[mu, kappa])
                            .mul(projector.component(&[nu, lambda]))
                            .mul(&sym),
                    );
                }
            }
            acc
        });

        let raw: Vec<ScalarExpr> = (0..dim * dim)
            .map(|_| self.polynomial(dim, 2, amplitude))
            .collect();
        let newton_coriolis = TensorField::from_fn(dim, &[Down, Down], |idx| {
            raw[idx[0] * dim + idx[1]]
                .sub(&raw[idx[1] * dim + idx[0]])
                .scale(0.5)
        });

        ConnectionData {
            spatial_torsion,
            clock_nonmetricity,
            spatial_nonmetricity,
            newton_coriolis,
        }
    }

    /// Random spacelike vector field (`tau(w) = 0` up to rounding):
    /// a random polynomial field projected with `P`.
    pub fn spacelike_field(
        &mut self,
        structure: &GalileiStructure,
        observer: &Observer,
        amplitude: f64,
    ) -> TensorField {
        let dim = structure.dim();
        let projector = structure.spatial_projector(observer);
        let raw: Vec<ScalarExpr> = (0..dim)
            .map(|_| self.polynomial(dim, 2, amplitude))
            .collect();
        TensorField::from_fn(dim, &[Up], |idx| {
            let mut acc = ScalarExpr::zero(dim);
            for lambda in 0..dim {
                acc = acc.add(&projector.component(&[idx[0], lambda]).mul(&raw[lambda]));
            }
            acc
        })
    }

    /// Random scalar expression that is smooth and pole-free on the sample
    /// box: polynomials composed with sin, cos, exp, guarded sqrt and
    /// guarded quotients.
    pub fn expression(&mut self, dim: usize, depth: u32) -> ScalarExpr {
        if depth == 0 {
            return self.polynomial(dim, 2, 1.0);
        }
        match self.rng.gen_range(0..8) {
            0 => self
                .expression(dim, depth - 1)
                .add(&self.expression(dim, depth - 1)),
            1 => self
                .expression(dim, depth - 1)
                .mul(&self.expression(dim, depth - 1)),
            2 => {
                // Denominator 1 + e^2 never vanishes.
                let den = ScalarExpr::one(dim).add(&self.expression(dim, depth - 1).powi(2));
                self.expression(dim, depth - 1).div(&den)
            }
            3 => self.expression(dim, depth - 1).sin(),
            4 => self.expression(dim, depth - 1).cos(),
            // exp of a bounded argument: scale down to avoid huge values.
            5 => self.expression(dim, depth - 1).scale(0.25).exp(),
            6 => ScalarExpr::one(dim)
                .add(&self.expression(dim, depth - 1).powi(2))
                .sqrt(),
            _ => self.expression(dim, depth - 1).powi(self.rng.gen_range(2..4)),
        }
    }
}
