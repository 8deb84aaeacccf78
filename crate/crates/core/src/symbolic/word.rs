use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("empty word")]
    Empty,
    #[error("invalid symbol {0:?}; words use the symbols 1 and 2")]
    BadSymbol(char),
    #[error("word {word} is not minimal: it repeats a block of length {period}")]
    NotMinimal { word: String, period: usize },
}

/// A finite word over the symbols `1` and `2`, read as one period of a periodic itinerary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SymbolWord {
    symbols: Vec<u8>,
}

impl SymbolWord {
    pub fn new(symbols: Vec<u8>) -> Result<Self, WordError> {
        if symbols.is_empty() {
            return Err(WordError::Empty);
        }
        if let Some(&s) = symbols.iter().find(|&&s| s != 1 && s != 2) {
            return Err(WordError::BadSymbol(char::from(b'0' + s.min(9))));
        }
        Ok(SymbolWord { symbols })
    }

    pub fn parse(s: &str) -> Result<Self, WordError> {
        let symbols = s
            .trim()
            .chars()
            .map(|c| match c {
                '1' => Ok(1),
                '2' => Ok(2),
                other => Err(WordError::BadSymbol(other)),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        SymbolWord::new(symbols)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Shortest `d` dividing the length with `w` a power of its first `d` symbols.
    pub fn minimal_period(&self) -> usize {
        let n = self.len();
        (1..=n)
            .find(|&d| n.is_multiple_of(d) && (d..n).all(|i| self.symbols[i] == self.symbols[i - d]))
            .unwrap_or(n)
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal_period() == self.len()
    }

    pub fn require_minimal(&self) -> Result<(), WordError> {
        let period = self.minimal_period();
        if period == self.len() {
            Ok(())
        } else {
            Err(WordError::NotMinimal {
                word: self.to_string(),
                period,
            })
        }
    }

    /// Left shift by `k` positions.
    pub fn rotated(&self, k: usize) -> SymbolWord {
        let n = self.len();
        let symbols = (0..n).map(|i| self.symbols[(i + k) % n]).collect();
        SymbolWord { symbols }
    }

    pub fn rotations(&self) -> Vec<SymbolWord> {
        (0..self.len()).map(|k| self.rotated(k)).collect()
    }

    /// Lexicographically least rotation.
    pub fn canonical(&self) -> SymbolWord {
        self.rotations().into_iter().min().expect("non-empty word")
    }

    /// Number of `2`s, i.e. of passes through the orientation-reversing branch.
    pub fn count_twos(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == 2).count()
    }

    /// Symbol at position `i` of the periodic extension.
    pub fn at(&self, i: usize) -> u8 {
        self.symbols[i % self.len()]
    }
}

impl fmt::Display for SymbolWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl From<SymbolWord> for String {
    fn from(w: SymbolWord) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for SymbolWord {
    type Error = WordError;
    fn try_from(s: String) -> Result<Self, WordError> {
        SymbolWord::parse(&s)
    }
}

/// Order of periodic itineraries when symbol `2` reverses orientation: at the first difference
/// `1 < 2` if an even number of `2`s precede it, and `2 < 1` otherwise.
pub fn twisted_cmp(x: &SymbolWord, y: &SymbolWord) -> Ordering {
    let n = 2 * x.len().max(y.len()) * x.len().min(y.len()).max(1);
    let mut twos = 0usize;
    for i in 0..n {
        let (a, b) = (x.at(i), y.at(i));
        if a != b {
            let ord = a.cmp(&b);
            return if twos.is_multiple_of(2) { ord } else { ord.reverse() };
        }
        if a == 2 {
            twos += 1;
        }
    }
    Ordering::Equal
}

/// Minimal words (Lyndon words) of length `n`, one per primitive necklace, in lexicographic
/// order.
pub fn lyndon_words(n: usize) -> Vec<SymbolWord> {
    if n == 0 {
        return Vec::new();
    }
    // Duval's generation algorithm over the alphabet {1, 2}
    let mut out = Vec::new();
    let mut w: Vec<i8> = vec![-1];
    while !w.is_empty() {
        let last = w.len() - 1;
        w[last] += 1;
        if w.len() == n {
            out.push(SymbolWord {
                symbols: w.iter().map(|&s| (s + 1) as u8).collect(),
            });
        }
        let m = w.len();
        while w.len() < n {
            let s = w[w.len() - m];
            w.push(s);
        }
        while let Some(&l) = w.last() {
            if l == 1 {
                w.pop();
            } else {
                break;
            }
        }
    }
    out
}

/// Number of binary Lyndon words of length `n`, by Möbius inversion.
pub fn necklace_count(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut total: i64 = 0;
    for d in 1..=n {
        if n.is_multiple_of(d) {
            total += mobius(n / d) * (1i64 << d);
        }
    }
    (total / n as i64) as usize
}

fn mobius(mut n: usize) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}
