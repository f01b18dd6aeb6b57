//! Finite abelian groups given by explicit addition tables.
//!
//! Every group built here is a direct product of cyclic groups, which covers
//! both `Z/qZ` and the quotient `A2/3A2 ~ Z3 x Z3`. Elements are plain
//! indices; for a product group the index of `(c1, .., cl)` is the mixed-radix
//! number `c1 * r^(l-1) + .. + cl`, so `(c1, c2) -> 3*c1 + c2` for `Z3 x Z3`.

use crate::error::{Error, Result};

/// Index of a group element.
pub type Element = usize;

const MAX_ORDER: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAbelianGroup {
    order: usize,
    /// Cyclic factor orders, most significant first.
    factors: Vec<usize>,
    add: Vec<u8>,
    neg: Vec<u8>,
}

impl FiniteAbelianGroup {
    /// `Z/qZ` with `add(a, b) = (a + b) mod q`.
    pub fn cyclic(q: usize) -> Result<Self> {
        Self::direct_product(&[q])
    }

    /// `Z3 x Z3`, the additive group of the nested code `A2/3A2`.
    pub fn product_z3z3() -> Self {
        Self::direct_product(&[3, 3]).expect("Z3 x Z3 is valid")
    }

    /// Direct product of cyclic groups with the given orders.
    pub fn direct_product(factors: &[usize]) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&r| r < 2) {
            return Err(Error::InvalidGroupOrder(factors.iter().product()));
        }
        let order: usize = factors.iter().product();
        if order > MAX_ORDER {
            return Err(Error::InvalidGroupOrder(order));
        }
        let mut group = FiniteAbelianGroup {
            order,
            factors: factors.to_vec(),
            add: vec![0; order * order],
            neg: vec![0; order],
        };
        for a in 0..order {
            let ca = group.coordinates(a);
            let na: Vec<usize> = ca
                .iter()
                .zip(factors)
                .map(|(&c, &r)| (r - c) % r)
                .collect();
            group.neg[a] = group.index_of(&na) as u8;
            for b in 0..order {
                let cb = group.coordinates(b);
                let sum: Vec<usize> = ca
                    .iter()
                    .zip(&cb)
                    .zip(factors)
                    .map(|((&x, &y), &r)| (x + y) % r)
                    .collect();
                group.add[a * order + b] = group.index_of(&sum) as u8;
            }
        }
        Ok(group)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// The identity element, always index 0.
    #[inline]
    pub fn identity(&self) -> Element {
        0
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        self.add[a * self.order + b] as Element
    }

    #[inline]
    pub fn neg(&self, a: Element) -> Element {
        self.neg[a] as Element
    }

    #[inline]
    pub fn sub(&self, a: Element, b: Element) -> Element {
        self.add(a, self.neg(b))
    }

    /// Group sum of a sequence of elements.
    pub fn sum<I: IntoIterator<Item = Element>>(&self, items: I) -> Element {
        items
            .into_iter()
            .fold(self.identity(), |acc, x| self.add(acc, x))
    }

    /// Row `a` of the addition table: `b -> a + b`.
    #[inline]
    pub(crate) fn add_row(&self, a: Element) -> &[u8] {
        &self.add[a * self.order..(a + 1) * self.order]
    }

    #[inline]
    pub(crate) fn neg_table(&self) -> &[u8] {
        &self.neg
    }

    /// Mixed-radix coordinates of an element.
    pub fn coordinates(&self, mut g: Element) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, &r) in out.iter_mut().zip(&self.factors).rev() {
            *slot = g % r;
            g /= r;
        }
        out
    }

    /// Inverse of [`coordinates`](Self::coordinates); coordinates are reduced mod each factor.
    pub fn index_of(&self, coords: &[usize]) -> Element {
        coords
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&c, &r)| acc * r + c % r)
    }

    pub fn check_element(&self, g: Element) -> Result<()> {
        if g < self.order {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "element {g} out of range for group of order {}",
                self.order
            )))
        }
    }
}
