use std::collections::HashMap;

use super::Monomial;

/// The ordered monomial basis `v_r(x)` of polynomials of degree at most `r`.
///
/// Monomials are listed by increasing total degree and, inside a degree,
/// in the order of [`Monomial`]'s `Ord` impl. A basis of order `r` is a
/// prefix of every basis of higher order in the same dimension.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n: usize,
    r: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(n: usize, r: u32) -> Self {
        assert!(n >= 1, "basis dimension must be positive");
        let mut monomials = Vec::new();
        let mut buf = vec![0u32; n];
        for d in 0..=r {
            push_degree(&mut monomials, &mut buf, 0, d);
        }
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Self {
            n,
            r,
            monomials,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.r
    }

    /// `s(r) = binomial(n + r, n)`.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Number of monomials of degree at most `d` in this dimension.
    pub fn size_for(n: usize, d: u32) -> usize {
        binomial(n as u64 + d as u64, n as u64) as usize
    }
}

fn push_degree(out: &mut Vec<Monomial>, buf: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(Monomial::new(buf.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e;
        push_degree(out, buf, pos + 1, remaining - e);
    }
    buf[pos] = 0;
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
