use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type accuracies are reported in.
///
/// `f64` is the everyday choice; `Rational64` gives exact fractions, which is
/// what the reference scorers in the test-suite compare against.
pub trait Scalar:
    Num + FromPrimitive + ToPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static
{
    /// `num / den`; `den` must be non-zero.
    fn ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        Self::from_u64(num).expect("count fits the scalar")
            / Self::from_u64(den).expect("count fits the scalar")
    }

    fn mean(values: &[Self]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sum = values.iter().fold(Self::zero(), |acc, v| acc + *v);
        Some(sum / Self::from_usize(values.len()).expect("length fits the scalar"))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + FromPrimitive + ToPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn ratio_and_mean() {
        assert_eq!(f64::ratio(1, 4), 0.25);
        assert_eq!(f32::ratio(3, 4), 0.75);
        assert_eq!(Rational64::ratio(2, 6), Rational64::new(1, 3));
        assert_eq!(
            Rational64::mean(&[
                Rational64::new(1, 3),
                Rational64::new(2, 3),
                Rational64::new(1, 1)
            ]),
            Some(Rational64::new(2, 3))
        );
        assert_eq!(f64::mean(&[]), None);
        assert_eq!(Rational64::new(1, 4).as_f64(), 0.25);
    }
}
