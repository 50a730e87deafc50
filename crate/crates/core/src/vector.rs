//! Fixed-dimension real vectors for states and actions.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Rejects NaN and infinite components.
            pub fn new(components: Vec<f64>) -> Result<Self> {
                if let Some((index, &value)) =
                    components.iter().enumerate().find(|(_, v)| !v.is_finite())
                {
                    return Err(Error::NonFinite { index, value });
                }
                Ok(Self(components))
            }

            pub fn from_slice(components: &[f64]) -> Result<Self> {
                Self::new(components.to_vec())
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub(crate) fn expect_dim(&self, expected: usize) -> Result<()> {
                if self.0.len() == expected {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch { expected, got: self.0.len() })
                }
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{:?}", stringify!($name), self.0)
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }
    };
}

real_vector!(
    /// A configuration-space state.
    StateVec
);
real_vector!(
    /// A control action.
    ActionVec
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(StateVec::new(vec![0.0, f64::NAN]).is_err());
        assert!(ActionVec::new(vec![f64::INFINITY]).is_err());
        assert_eq!(StateVec::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }
}
