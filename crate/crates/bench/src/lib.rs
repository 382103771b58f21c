//! Fixtures shared by the benchmarks.

use regadj::population::random::random_population;
use regadj::seed::rng_for;
use regadj::sim::{draw, SimDraw};
use regadj::{PopulationSpec, Scenario};

/// One dataset from a reference scenario at π = 0.5.
pub fn scenario_draw(id: u8, n: usize, seed: u64) -> SimDraw {
    let sc = Scenario::reference(id).expect("reference scenario").with_n(n);
    draw(&sc, 0.5, seed).expect("valid draw")
}

/// A moment-mode population with `p` covariates.
pub fn population(p: usize, seed: u64) -> PopulationSpec {
    random_population(p, &mut rng_for(seed, &[p as u64]))
}
