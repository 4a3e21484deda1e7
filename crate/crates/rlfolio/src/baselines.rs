//! Fixed-weight reference allocations.
//!
//! Each baseline maps an asset universe to one static weight vector in panel
//! asset order; the backtester re-applies it at every rebalance. Class
//! budgets are split equally among the assets of that class.

use thiserror::Error;

use crate::data::{Asset, AssetClass};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("baseline needs a non-empty asset universe")]
    EmptyUniverse,
    #[error("baseline requires at least one {0} asset")]
    MissingClass(AssetClass),
}

/// `1/N` in every asset. The last weight is set to `1 - sum(previous)` so
/// the vector sums to exactly 1.0 even when `1/N` is not representable.
pub fn equal_weight(assets: &[Asset]) -> Result<Vec<f64>, BaselineError> {
    if assets.is_empty() {
        return Err(BaselineError::EmptyUniverse);
    }
    let n = assets.len();
    let mut w = vec![1.0 / n as f64; n];
    let partial: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - partial;
    Ok(w)
}

/// The 60/40 portfolio: 60% split across equities, 40% across bonds of
/// either duration.
pub fn sixty_forty(assets: &[Asset]) -> Result<Vec<f64>, BaselineError> {
    if assets.is_empty() {
        return Err(BaselineError::EmptyUniverse);
    }
    let is_bond = |c: AssetClass| {
        matches!(c, AssetClass::BondIntermediate | AssetClass::BondLong)
    };
    let n_equity = assets.iter().filter(|a| a.class == AssetClass::Equity).count();
    let n_bond = assets.iter().filter(|a| is_bond(a.class)).count();
    if n_equity == 0 {
        return Err(BaselineError::MissingClass(AssetClass::Equity));
    }
    if n_bond == 0 {
        return Err(BaselineError::MissingClass(AssetClass::BondLong));
    }
    Ok(assets
        .iter()
        .map(|a| {
            if a.class == AssetClass::Equity {
                0.6 / n_equity as f64
            } else if is_bond(a.class) {
                0.4 / n_bond as f64
            } else {
                0.0
            }
        })
        .collect())
}

/// The All-Weather split: 30% equity, 40% long bonds, 15% intermediate
/// bonds, 7.5% gold, 7.5% commodities. Every class must be present.
pub fn all_weather(assets: &[Asset]) -> Result<Vec<f64>, BaselineError> {
    if assets.is_empty() {
        return Err(BaselineError::EmptyUniverse);
    }
    let budget = |c: AssetClass| match c {
        AssetClass::Equity => 0.30,
        AssetClass::BondLong => 0.40,
        AssetClass::BondIntermediate => 0.15,
        AssetClass::Gold => 0.075,
        AssetClass::Commodity => 0.075,
    };
    for class in AssetClass::ALL {
        if !assets.iter().any(|a| a.class == class) {
            return Err(BaselineError::MissingClass(class));
        }
    }
    Ok(assets
        .iter()
        .map(|a| {
            let n = assets.iter().filter(|b| b.class == a.class).count();
            budget(a.class) / n as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universe(classes: &[AssetClass]) -> Vec<Asset> {
        classes
            .iter()
            .enumerate()
            .map(|(i, c)| Asset {
                id: format!("asset{i}"),
                class: *c,
            })
            .collect()
    }

    #[test]
    fn equal_weight_quarters() {
        let w = equal_weight(&universe(&[AssetClass::Equity; 4])).unwrap();
        assert_eq!(w, vec![0.25; 4]);
    }

    #[test]
    fn equal_weight_sums_to_exactly_one() {
        for n in 1..=68 {
            let w = equal_weight(&universe(&vec![AssetClass::Equity; n])).unwrap();
            let sum: f64 = w.iter().sum();
            assert_eq!(sum, 1.0, "n = {n}: sum {sum}");
        }
    }

    #[test]
    fn sixty_forty_pools_both_bond_durations() {
        let w = sixty_forty(&universe(&[
            AssetClass::Equity,
            AssetClass::Equity,
            AssetClass::BondLong,
            AssetClass::BondIntermediate,
            AssetClass::Gold,
        ]))
        .unwrap();
        assert_eq!(w, vec![0.3, 0.3, 0.2, 0.2, 0.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_weather_one_asset_per_class() {
        let w = all_weather(&universe(&[
            AssetClass::Equity,
            AssetClass::BondLong,
            AssetClass::BondIntermediate,
            AssetClass::Gold,
            AssetClass::Commodity,
        ]))
        .unwrap();
        assert_eq!(w, vec![0.30, 0.40, 0.15, 0.075, 0.075]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_weather_splits_within_classes() {
        let w = all_weather(&universe(&[
            AssetClass::Equity,
            AssetClass::Equity,
            AssetClass::BondLong,
            AssetClass::BondIntermediate,
            AssetClass::Gold,
            AssetClass::Commodity,
        ]))
        .unwrap();
        assert_eq!(w[0], 0.15);
        assert_eq!(w[1], 0.15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_classes_are_named() {
        assert_eq!(equal_weight(&[]), Err(BaselineError::EmptyUniverse));
        assert_eq!(
            sixty_forty(&universe(&[AssetClass::BondLong])),
            Err(BaselineError::MissingClass(AssetClass::Equity))
        );
        assert_eq!(
            all_weather(&universe(&[
                AssetClass::Equity,
                AssetClass::BondLong,
                AssetClass::BondIntermediate,
                AssetClass::Gold,
            ])),
            Err(BaselineError::MissingClass(AssetClass::Commodity))
        );
    }
}
