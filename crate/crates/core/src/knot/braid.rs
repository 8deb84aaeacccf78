use serde::{Deserialize, Serialize};

use super::{KnotError, PolygonalKnot, Provenance};
use crate::symbolic::{twisted_cmp, SymbolWord};

/// Braid on `strands` strands; letter `i` is `σ_i` and `−i` is `σ_i^{-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidWord {
    pub strands: usize,
    pub letters: Vec<i32>,
}

impl BraidWord {
    pub fn new(strands: usize, letters: Vec<i32>) -> Result<Self, KnotError> {
        if strands == 0 {
            return Err(KnotError::BraidLetter { letter: 0, strands });
        }
        if let Some(&l) = letters
            .iter()
            .find(|&&l| l == 0 || l.unsigned_abs() as usize >= strands)
        {
            return Err(KnotError::BraidLetter { letter: l, strands });
        }
        Ok(BraidWord { strands, letters })
    }

    /// `perm[i]` is the bottom position reached by the strand starting at top position `i`.
    pub fn permutation(&self) -> Vec<usize> {
        let mut at: Vec<usize> = (0..self.strands).collect();
        for &l in &self.letters {
            let i = l.unsigned_abs() as usize - 1;
            at.swap(i, i + 1);
        }
        let mut perm = vec![0; self.strands];
        for (pos, &s) in at.iter().enumerate() {
            perm[s] = pos;
        }
        perm
    }

    /// Number of components of the closure.
    pub fn components(&self) -> usize {
        let perm = self.permutation();
        let mut seen = vec![false; self.strands];
        let mut cycles = 0;
        for s in 0..self.strands {
            if !seen[s] {
                cycles += 1;
                let mut k = s;
                while !seen[k] {
                    seen[k] = true;
                    k = perm[k];
                }
            }
        }
        cycles
    }

    pub fn exponent_sum(&self) -> i64 {
        self.letters.iter().map(|l| i64::from(l.signum())).sum()
    }
}

impl std::fmt::Display for BraidWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|&l| {
                if l > 0 {
                    format!("s{l}")
                } else {
                    format!("s{}^-1", -l)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// `(σ_1 ⋯ σ_{p−1})^q`, whose closure is the torus knot `T(p, q)`.
pub fn torus_braid(p: usize, q: usize) -> Result<BraidWord, KnotError> {
    let letters = (0..q).flat_map(|_| 1..p as i32).collect();
    BraidWord::new(p, letters)
}

const CROSS_DEPTH: f64 = 0.3;

/// Closed braid as a polygon: strands descend in `y` at `x = 1..n`, each letter occupies one
/// unit of height, and the closure runs around nested rectangles in the plane `z = 0`.
pub fn braid_to_knot(braid: &BraidWord) -> Result<PolygonalKnot, KnotError> {
    let comps = braid.components();
    if comps != 1 {
        return Err(KnotError::NotAKnot(comps));
    }
    let n = braid.strands;
    let levels = braid.letters.len();
    // paths[s]: vertices of the strand starting at top position s, excluding its start
    let mut paths: Vec<Vec<[f64; 3]>> = vec![Vec::new(); n];
    let mut at: Vec<usize> = (0..n).collect();
    for (k, &l) in braid.letters.iter().enumerate() {
        let y0 = -(k as f64);
        let i = l.unsigned_abs() as usize - 1;
        for pos in 0..n {
            let s = at[pos];
            let x0 = (pos + 1) as f64;
            if pos == i || pos == i + 1 {
                let dx = if pos == i { 1.0 } else { -1.0 };
                // a positive letter lifts the strand moving left
                let lifted = (l > 0) == (dx < 0.0);
                let z = if lifted { CROSS_DEPTH } else { -CROSS_DEPTH };
                paths[s].push([x0 + 0.25 * dx, y0 - 0.25, z]);
                paths[s].push([x0 + 0.75 * dx, y0 - 0.75, z]);
                paths[s].push([x0 + dx, y0 - 1.0, 0.0]);
            } else {
                paths[s].push([x0, y0 - 1.0, 0.0]);
            }
        }
        at.swap(i, i + 1);
    }
    let perm = braid.permutation();
    let bottom = -(levels as f64);
    let mut vertices = Vec::new();
    let mut s = 0usize;
    for _ in 0..n {
        let x = (s + 1) as f64;
        vertices.push([x, 0.0, 0.0]);
        vertices.extend_from_slice(&paths[s]);
        let end = perm[s];
        let xe = (end + 1) as f64;
        let r = (n - end) as f64;
        let xr = n as f64 + r;
        vertices.push([xe, bottom - r, 0.0]);
        vertices.push([xr, bottom - r, 0.0]);
        vertices.push([xr, r, 0.0]);
        vertices.push([xe, r, 0.0]);
        s = end;
    }
    PolygonalKnot::new(vertices, Provenance::Braid(braid.to_string()))
}

/// Braid of a periodic orbit on the L(0,1) template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzBraid {
    pub word: SymbolWord,
    /// Cyclic shifts of the word in branch-line order.
    pub order: Vec<SymbolWord>,
    pub ones: usize,
    pub twos: usize,
    pub braid: BraidWord,
}

/// Places the cyclic shifts of `word` on the branch line in the order of [`twisted_cmp`],
/// applies a positive half twist to the strands of the twisted ear (symbol `2`), and then the
/// positive permutation braid that carries every strand to the position of its shift.
pub fn lorenz_word_to_braid(word: &SymbolWord) -> Result<LorenzBraid, KnotError> {
    word.require_minimal()?;
    let k = word.len();
    let mut order = word.rotations();
    order.sort_by(twisted_cmp);
    let pos = |w: &SymbolWord| order.iter().position(|o| o == w).expect("rotation");
    let target: Vec<usize> = order.iter().map(|w| pos(&w.rotated(1))).collect();
    let ones = order.iter().filter(|w| w.symbols()[0] == 1).count();
    let twos = k - ones;
    let mut letters = Vec::new();
    for top in (1..twos).rev() {
        for g in 1..=top {
            letters.push((ones + g) as i32);
        }
    }
    let mut cur: Vec<usize> = (0..k).collect();
    cur[ones..].reverse();
    loop {
        let Some(j) = (0..k.saturating_sub(1)).find(|&j| target[cur[j]] > target[cur[j + 1]]) else {
            break;
        };
        letters.push(j as i32 + 1);
        cur.swap(j, j + 1);
    }
    let braid = BraidWord::new(k, letters)?;
    Ok(LorenzBraid {
        word: word.clone(),
        order,
        ones,
        twos,
        braid,
    })
}
