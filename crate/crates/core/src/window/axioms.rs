//! Finite checker for the window-system axioms.
//!
//! The system under test is generated by a [`TimeAtomSet`]:
//!
//! * windows `W` are the nonempty unions of atoms;
//! * null windows `N` are the subsets of the null region, which is the
//!   complement cell together with any declared null windows (half-open
//!   zero-length sets are empty and therefore null as well).
//!
//! All sets are represented exactly as bitsets over the elementary segments
//! of an endpoint sweep, so membership questions are decided without
//! floating-point tolerance. Families up to `exhaustive_cap` members are
//! enumerated completely; larger ones are checked on a seeded random
//! subfamily whose size is recorded in the report.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IntervalSet, IntervalWindow, TimeAtomSet};
use crate::error::{Error, Result};
use crate::report::{AxiomCheck, AxiomReport, EvaluationMode, Witness};

pub const AXIOM_DISJOINT_UNIONS: &str = "axiom1_disjoint_union_closure";
pub const AXIOM_SEMIRING: &str = "axiom2_null_disjoint_semiring";
pub const AXIOM_LOCAL_GENERATION: &str = "axiom3_local_generation";
pub const AXIOM_COVERING: &str = "axiom4_covering";

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheckOptions {
    /// Largest family enumerated member by member.
    pub exhaustive_cap: u64,
    /// Largest family for which all ordered pairs are enumerated.
    pub pair_cap: u64,
    /// Members (or pairs) drawn when a family exceeds its cap.
    pub sample_size: u64,
    pub seed: u64,
    /// Fail with [`Error::TooLarge`] instead of sampling.
    pub force_exhaustive: bool,
}

impl Default for AxiomCheckOptions {
    fn default() -> Self {
        AxiomCheckOptions {
            exhaustive_cap: 1 << 16,
            pair_cap: 1 << 12,
            sample_size: 1 << 14,
            seed: 0x5eed,
            force_exhaustive: false,
        }
    }
}

struct Cells {
    bounds: Vec<[f64; 2]>,
}

impl Cells {
    fn new(sets: &[&IntervalSet], horizon: [f64; 2]) -> Self {
        let mut endpoints: Vec<f64> = sets
            .iter()
            .flat_map(|s| s.endpoints().collect::<Vec<_>>())
            .chain(horizon)
            .collect();
        endpoints.sort_by(f64::total_cmp);
        endpoints.dedup();
        let bounds = endpoints.windows(2).map(|w| [w[0], w[1]]).collect();
        Cells { bounds }
    }

    fn bits(&self, set: &IntervalSet) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.bounds.len());
        for (k, c) in self.bounds.iter().enumerate() {
            if set.covers(c[0], c[1]) {
                b.insert(k);
            }
        }
        b
    }

    fn length(&self, bits: &FixedBitSet) -> f64 {
        bits.ones().map(|k| self.bounds[k][1] - self.bounds[k][0]).sum()
    }

    fn intervals(&self, bits: &FixedBitSet) -> Vec<[f64; 2]> {
        IntervalSet::from_pieces(bits.ones().map(|k| self.bounds[k])).pieces().to_vec()
    }
}

enum Member {
    Window(Vec<usize>),
    Null(String),
}

struct System {
    cells: Cells,
    atoms: Vec<FixedBitSet>,
    null_region: FixedBitSet,
    uncovered: FixedBitSet,
    /// Cells of the algebra generated by atoms, the complement cell and the
    /// declared null windows.
    sigma_cells: Vec<FixedBitSet>,
    null_members: Vec<(String, FixedBitSet)>,
}

impl System {
    fn new(atoms: &TimeAtomSet, null_windows: &[IntervalWindow]) -> Self {
        let horizon = IntervalSet::interval(atoms.horizon[0], atoms.horizon[1]);
        let atom_sets: Vec<IntervalSet> = atoms.atoms.iter().map(|a| a.as_set()).collect();
        let complement = atoms.complement_set();
        let nulls: Vec<(String, IntervalSet)> = null_windows
            .iter()
            .map(|w| (w.id.clone(), w.as_set().intersection(&horizon)))
            .collect();

        let mut all: Vec<&IntervalSet> = atom_sets.iter().collect();
        all.push(&complement);
        all.extend(nulls.iter().map(|(_, s)| s));
        let cells = Cells::new(&all, atoms.horizon);
        let n_cells = cells.bounds.len();

        let atom_bits: Vec<FixedBitSet> = atom_sets.iter().map(|s| cells.bits(s)).collect();
        let complement_bits = cells.bits(&complement);
        let null_bits: Vec<(String, FixedBitSet)> = nulls.iter().map(|(id, s)| (id.clone(), cells.bits(s))).collect();

        let mut null_region = complement_bits.clone();
        for (_, b) in &null_bits {
            null_region.union_with(b);
        }
        let mut uncovered = FixedBitSet::with_capacity(n_cells);
        uncovered.insert_range(..);
        uncovered.difference_with(&null_region);
        for a in &atom_bits {
            uncovered.difference_with(a);
        }

        let generators: Vec<&FixedBitSet> = atom_bits
            .iter()
            .chain(std::iter::once(&complement_bits))
            .chain(null_bits.iter().map(|(_, b)| b))
            .collect();
        let mut groups: Vec<(Vec<bool>, FixedBitSet)> = Vec::new();
        for k in 0..n_cells {
            let sig: Vec<bool> = generators.iter().map(|g| g.contains(k)).collect();
            match groups.iter_mut().find(|(s, _)| *s == sig) {
                Some((_, bits)) => bits.insert(k),
                None => {
                    let mut bits = FixedBitSet::with_capacity(n_cells);
                    bits.insert(k);
                    groups.push((sig, bits));
                }
            }
        }

        let mut null_members = vec![("empty".to_string(), FixedBitSet::with_capacity(n_cells))];
        if !complement_bits.is_clear() {
            null_members.push(("complement".to_string(), complement_bits));
        }
        null_members.extend(null_bits);
        null_members.push(("null_region".to_string(), null_region.clone()));

        System {
            cells,
            atoms: atom_bits,
            null_region,
            uncovered,
            sigma_cells: groups.into_iter().map(|(_, b)| b).collect(),
            null_members,
        }
    }

    fn empty(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.cells.bounds.len())
    }

    fn window_bits(&self, atoms: &[usize]) -> FixedBitSet {
        let mut b = self.empty();
        for &t in atoms {
            b.union_with(&self.atoms[t]);
        }
        b
    }

    fn in_null(&self, s: &FixedBitSet) -> bool {
        s.is_subset(&self.null_region)
    }

    fn atoms_within(&self, s: &FixedBitSet) -> FixedBitSet {
        let mut u = self.empty();
        for a in &self.atoms {
            if a.is_subset(s) {
                u.union_with(a);
            }
        }
        u
    }

    fn in_windows(&self, s: &FixedBitSet) -> bool {
        !s.is_clear() && self.atoms_within(s) == *s
    }

    /// Part of `s` that cannot be written as a disjoint union of members of
    /// `W ∪ N`; empty iff `s` is such a union.
    fn undecomposable(&self, s: &FixedBitSet) -> FixedBitSet {
        let mut rest = s.clone();
        rest.difference_with(&self.atoms_within(s));
        rest.difference_with(&self.null_region);
        rest
    }

    /// Part of `s` that breaks membership in `σ(W ∪ N)`.
    fn outside_sigma(&self, s: &FixedBitSet) -> FixedBitSet {
        let mut bad = self.empty();
        for a in &self.atoms {
            let mut whole = a.clone();
            whole.difference_with(&self.null_region);
            let mut part = s.clone();
            part.intersect_with(&whole);
            if !part.is_clear() && part != whole {
                bad.union_with(&part);
            }
        }
        let mut part = s.clone();
        part.intersect_with(&self.uncovered);
        if !part.is_clear() && part != self.uncovered {
            bad.union_with(&part);
        }
        bad
    }
}

fn member_indices(m: &Member) -> Vec<usize> {
    match m {
        Member::Window(a) => a.clone(),
        Member::Null(_) => Vec::new(),
    }
}

fn member_name(m: &Member) -> String {
    match m {
        Member::Window(a) => format!("atoms {a:?}"),
        Member::Null(id) => format!("null `{id}`"),
    }
}

/// Checks the four window-system axioms on the finite system generated by
/// `atoms` with the given declared null windows.
pub fn check_window_system(
    atoms: &TimeAtomSet,
    null_windows: &[IntervalWindow],
    opts: &AxiomCheckOptions,
) -> Result<AxiomReport> {
    let sys = System::new(atoms, null_windows);
    let n_atoms = atoms.atoms.len();
    let window_family: u64 = if n_atoms >= 63 { u64::MAX } else { (1u64 << n_atoms) - 1 };
    let family = window_family.saturating_add(sys.null_members.len() as u64);
    let exhaustive = family <= opts.exhaustive_cap;
    if !exhaustive && opts.force_exhaustive {
        return Err(Error::TooLarge { members: family, cap: opts.exhaustive_cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut windows: Vec<Vec<usize>> = Vec::new();
    if exhaustive {
        for mask in 1..=window_family {
            windows.push((0..n_atoms).filter(|t| mask >> t & 1 == 1).collect());
        }
    } else {
        while (windows.len() as u64) < opts.sample_size {
            let pick: Vec<usize> = (0..n_atoms).filter(|_| rng.random::<bool>()).collect();
            if !pick.is_empty() {
                windows.push(pick);
            }
        }
    }
    let mut members: Vec<(Member, FixedBitSet)> =
        windows.into_iter().map(|a| (sys.window_bits(&a), a)).map(|(b, a)| (Member::Window(a), b)).collect();
    let n_window_members = members.len();
    members.extend(sys.null_members.iter().map(|(id, b)| (Member::Null(id.clone()), b.clone())));

    let pairs: Vec<(usize, usize)> = if members.len() as u64 <= opts.pair_cap {
        (0..members.len()).flat_map(|i| (0..members.len()).map(move |j| (i, j))).collect()
    } else {
        (0..opts.sample_size)
            .map(|_| (rng.random_range(0..members.len()), rng.random_range(0..members.len())))
            .collect()
    };
    let sampled_pairs = members.len() as u64 > opts.pair_cap;

    // Axiom 1: W closed under finite disjoint unions.
    let mut ax1 = AxiomCheck::new(AXIOM_DISJOINT_UNIONS);
    for &(i, j) in &pairs {
        if i >= n_window_members || j >= n_window_members {
            continue;
        }
        let (a, b) = (&members[i].1, &members[j].1);
        if !a.is_disjoint(b) {
            continue;
        }
        ax1.checked += 1;
        let mut u = a.clone();
        u.union_with(b);
        let bad = !sys.in_windows(&u);
        ax1.record(if bad { sys.cells.length(&u) } else { 0.0 }, bad, || Witness {
            indices: [member_indices(&members[i].0), member_indices(&members[j].0)].concat(),
            intervals: sys.cells.intervals(&u),
            deviation: sys.cells.length(&u),
            detail: "union of disjoint windows is not a window".into(),
        });
    }

    // Axiom 2: W ∩ N = ∅ and W ∪ N is a semi-ring.
    let mut ax2 = AxiomCheck::new(AXIOM_SEMIRING);
    for (m, bits) in &members[..n_window_members] {
        ax2.checked += 1;
        let bad = sys.in_null(bits);
        ax2.record(if bad { 1.0 } else { 0.0 }, bad, || Witness {
            indices: member_indices(m),
            intervals: sys.cells.intervals(bits),
            deviation: 1.0,
            detail: format!("window {} is null (length {})", member_name(m), sys.cells.length(bits)),
        });
    }
    for &(i, j) in &pairs {
        ax2.checked += 1;
        let (a, b) = (&members[i].1, &members[j].1);
        let mut inter = a.clone();
        inter.intersect_with(b);
        if !(sys.in_windows(&inter) || sys.in_null(&inter)) {
            let dev = sys.cells.length(&inter);
            ax2.record(dev, true, || Witness {
                indices: [member_indices(&members[i].0), member_indices(&members[j].0)].concat(),
                intervals: sys.cells.intervals(&inter),
                deviation: dev,
                detail: format!(
                    "intersection of {} and {} is neither a window nor null",
                    member_name(&members[i].0),
                    member_name(&members[j].0)
                ),
            });
        }
        let mut diff = a.clone();
        diff.difference_with(b);
        let rest = sys.undecomposable(&diff);
        if !rest.is_clear() {
            let dev = sys.cells.length(&rest);
            ax2.record(dev, true, || Witness {
                indices: [member_indices(&members[i].0), member_indices(&members[j].0)].concat(),
                intervals: sys.cells.intervals(&rest),
                deviation: dev,
                detail: format!(
                    "{} minus {} is not a disjoint union of windows and null windows",
                    member_name(&members[i].0),
                    member_name(&members[j].0)
                ),
            });
        }
    }

    // Axiom 3: (Σ_T)|W ⊂ σ(W ∪ N), with Σ_T generated by all cells in play.
    let mut ax3 = AxiomCheck::new(AXIOM_LOCAL_GENERATION);
    for (m, bits) in &members[..n_window_members] {
        for cell in &sys.sigma_cells {
            ax3.checked += 1;
            let mut s = bits.clone();
            s.intersect_with(cell);
            let bad = sys.outside_sigma(&s);
            if !bad.is_clear() {
                let dev = sys.cells.length(&bad);
                ax3.record(dev, true, || Witness {
                    indices: member_indices(m),
                    intervals: sys.cells.intervals(&bad),
                    deviation: dev,
                    detail: format!("measurable part of {} not generated by windows", member_name(m)),
                });
            }
        }
    }
    ax3.note = Some("verified for the finitely generated algebra only".into());

    // Axiom 4: a set meeting every window in a null set is null.
    let mut ax4 = AxiomCheck::new(AXIOM_COVERING);
    ax4.checked = 1;
    let gap = sys.cells.length(&sys.uncovered);
    ax4.record(gap, gap > 0.0, || Witness {
        indices: Vec::new(),
        intervals: sys.cells.intervals(&sys.uncovered),
        deviation: gap,
        detail: "non-null time meets no window".into(),
    });

    let mode = if exhaustive && !sampled_pairs {
        EvaluationMode::Exhaustive
    } else {
        EvaluationMode::Sampled { sample_size: opts.sample_size, seed: opts.seed }
    };
    Ok(AxiomReport { mode, checks: vec![ax1, ax2, ax3, ax4] })
}
