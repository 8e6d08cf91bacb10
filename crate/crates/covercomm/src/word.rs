//! Freely reduced words over a finite signed alphabet.
//!
//! Generators are the lowercase letters `a..z`, inverses the corresponding
//! uppercase letters. The signed-letter order is `a < A < b < B < ...`,
//! which is the order used by every canonical construction in this crate.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 26;

/// One signed letter: generator index plus an inversion flag.
///
/// The derived `Ord` is exactly the signed-letter order `a < A < b < B < ...`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Letter {
    pub gen: u8,
    pub inv: bool,
}

impl Letter {
    pub fn new(gen: u8, inv: bool) -> Letter {
        Letter { gen, inv }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        if c.is_ascii_lowercase() {
            Some(Letter::new(c as u8 - b'a', false))
        } else if c.is_ascii_uppercase() {
            Some(Letter::new(c as u8 - b'A', true))
        } else {
            None
        }
    }

    pub fn to_char(self) -> char {
        if self.inv {
            (b'A' + self.gen) as char
        } else {
            (b'a' + self.gen) as char
        }
    }

    pub fn inverse(self) -> Letter {
        Letter::new(self.gen, !self.inv)
    }

    /// Index into `0..2*rank` in signed-letter order.
    pub fn signed_index(self) -> usize {
        2 * self.gen as usize + self.inv as usize
    }

    pub fn from_signed_index(i: usize) -> Letter {
        Letter::new((i / 2) as u8, i % 2 == 1)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word. The reduced form is the canonical representative,
/// so equality of `Word`s is equality in the free group.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Word {
        Word(vec![l])
    }

    pub fn generator(gen: u8) -> Word {
        Word(vec![Letter::new(gen, false)])
    }

    /// Builds a word from letters, freely reducing.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
        let mut stack: Vec<Letter> = Vec::new();
        for l in letters {
            if stack.last() == Some(&l.inverse()) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Word(stack)
    }

    /// Parses a whitespace-free string with uppercase inverses; `1` (or the
    /// empty string) denotes the identity. Letters must lie within `rank`.
    pub fn parse(s: &str, rank: usize) -> Result<Word> {
        if s == "1" || s.is_empty() {
            return Ok(Word::empty());
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            let l = Letter::from_char(c)
                .ok_or_else(|| Error::Word(format!("invalid letter {c:?} in word {s:?}")))?;
            if (l.gen as usize) >= rank {
                return Err(Error::Word(format!(
                    "letter {c:?} outside the rank-{rank} alphabet in word {s:?}"
                )));
            }
            letters.push(l);
        }
        Ok(Word::from_letters(letters))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// Reduced product `self * rhs`.
    pub fn concat(&self, rhs: &Word) -> Word {
        Word::from_letters(self.0.iter().chain(rhs.0.iter()).copied())
    }

    /// Largest generator index used, if any.
    pub fn max_gen(&self) -> Option<u8> {
        self.0.iter().map(|l| l.gen).max()
    }

    /// Substitutes `images[i]` for generator `i`.
    pub fn substitute(&self, images: &[Word]) -> Word {
        let mut out: Vec<Letter> = Vec::new();
        for l in &self.0 {
            let img = &images[l.gen as usize];
            if l.inv {
                out.extend(img.0.iter().rev().map(|x| x.inverse()));
            } else {
                out.extend(img.0.iter().copied());
            }
        }
        Word::from_letters(out)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reduces() {
        let w = Word::parse("abBA", 2).unwrap();
        assert!(w.is_empty());
        let w = Word::parse("aBba", 2).unwrap();
        assert_eq!(w.to_string(), "aa");
    }

    #[test]
    fn parse_rejects_out_of_alphabet() {
        assert!(Word::parse("ac", 2).is_err());
        assert!(Word::parse("a1", 2).is_err());
    }

    #[test]
    fn inverse_concat() {
        let w = Word::parse("abA", 2).unwrap();
        assert!(w.concat(&w.inverse()).is_empty());
        assert_eq!(w.inverse().to_string(), "aBA");
    }

    #[test]
    fn signed_order() {
        let a = Letter::from_char('a').unwrap();
        let cap_a = Letter::from_char('A').unwrap();
        let b = Letter::from_char('b').unwrap();
        assert!(a < cap_a && cap_a < b);
        assert_eq!(Letter::from_signed_index(1), cap_a);
    }

    #[test]
    fn substitution() {
        let h = Word::parse("aB", 2).unwrap();
        let images = vec![Word::parse("aa", 2).unwrap(), Word::parse("ab", 2).unwrap()];
        assert_eq!(h.substitute(&images).to_string(), "aaBA");
    }

    #[test]
    fn identity_display() {
        assert_eq!(Word::empty().to_string(), "1");
        assert_eq!(Word::parse("1", 2).unwrap(), Word::empty());
    }
}
