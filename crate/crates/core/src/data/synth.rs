//! Synthetic tabular generators.
//!
//! # Fraud
//!
//! Eight raw features per transaction:
//!
//! | feature            | kind        | genuine                  | fraud                          |
//! |--------------------|-------------|--------------------------|--------------------------------|
//! | `amount`           | continuous  | LogNormal(3.5, 0.8)      | LogNormal(4.6, 0.8)            |
//! | `account_age_days` | continuous  | U{30..3650}              | same                           |
//! | `merchant_risk`    | continuous  | U(0, 1)                  | same                           |
//! | `prior_txn_count`  | continuous  | U{0..200}                | same                           |
//! | `hour`             | categorical | uniform over 24 hours    | 40% uniform in 00..05, else uniform |
//! | `day_of_week`      | categorical | uniform                  | same                           |
//! | `month`            | categorical | uniform                  | same                           |
//! | `channel`          | categorical | uniform {online, in_store, atm} | same                    |
//!
//! Exactly `round(n * fraud_fraction)` rows are fraud, placed at random
//! positions. The transaction amount carries the planted signal (the Bayes
//! accuracy of an amount threshold at a 50/50 mix is about 0.75); hour of day
//! carries a weak one; everything else is noise.
//!
//! # Census-like
//!
//! Fourteen raw features shaped after the UCI Adult census extract (6
//! continuous, 8 categorical, 37 encoded columns). The label is
//! Bernoulli(sigmoid(z)) with
//!
//! ```text
//! z = -7.0 + 0.035·age + 0.30·education_num + 0.03·hours_per_week
//!     + 0.0002·min(capital_gain, 20000) + 1.4·[married] + 0.4·[sex = Male]
//!     + 0.6·[occupation ∈ {Exec-managerial, Prof-specialty}]
//! ```
//!
//! `fnlwgt`, `race`, `native_country` and `capital_loss` carry no signal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{Dataset, RawColumn};
use crate::error::{Error, Result};
use crate::seed;

pub const FRAUD_RAW_FEATURES: [&str; 8] = [
    "amount",
    "account_age_days",
    "merchant_risk",
    "prior_txn_count",
    "hour",
    "day_of_week",
    "month",
    "channel",
];

pub const CENSUS_RAW_FEATURES: [&str; 14] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education_num",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
    "native_country",
];

const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const CHANNELS: [&str; 3] = ["online", "in_store", "atm"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

/// Balanced or imbalanced synthetic card-fraud transactions.
pub fn synth_fraud(n: usize, fraud_fraction: f64, seed: u64) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::Validation(format!("fraud generator needs n >= 100, got {n}")));
    }
    if !(fraud_fraction > 0.0 && fraud_fraction < 1.0) {
        return Err(Error::Validation(format!("fraud_fraction {fraud_fraction} outside (0, 1)")));
    }
    let n_fraud = (n as f64 * fraud_fraction).round() as usize;
    if n_fraud == 0 || n_fraud == n {
        return Err(Error::Validation(format!(
            "fraud_fraction {fraud_fraction} leaves a class empty at n = {n}"
        )));
    }

    let mut rng = seed::rng(seed);
    let mut is_fraud: Vec<bool> = (0..n).map(|i| i < n_fraud).collect();
    is_fraud.shuffle(&mut rng);

    let genuine_amount = LogNormal::<f64>::new(3.5, 0.8).expect("valid lognormal");
    let fraud_amount = LogNormal::<f64>::new(4.6, 0.8).expect("valid lognormal");
    let hours: Vec<String> = (0..24).map(|h| format!("{h:02}")).collect();

    let mut amount = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut risk = Vec::with_capacity(n);
    let mut prior = Vec::with_capacity(n);
    let mut hour = Vec::with_capacity(n);
    let mut day = Vec::with_capacity(n);
    let mut month = Vec::with_capacity(n);
    let mut channel = Vec::with_capacity(n);
    let mut label = Vec::with_capacity(n);
    for &fraud in &is_fraud {
        let a: f64 = if fraud {
            fraud_amount.sample(&mut rng)
        } else {
            genuine_amount.sample(&mut rng)
        };
        amount.push((a * 100.0).round() / 100.0);
        age.push(f64::from(rng.random_range(30u32..=3650)));
        risk.push((rng.random::<f64>() * 1000.0).round() / 1000.0);
        prior.push(f64::from(rng.random_range(0u32..=200)));
        let h = if fraud && rng.random_bool(0.4) {
            rng.random_range(0..6)
        } else {
            rng.random_range(0..24)
        };
        hour.push(hours[h].clone());
        day.push(pick(&mut rng, &DAYS).to_string());
        month.push(pick(&mut rng, &MONTHS).to_string());
        channel.push(pick(&mut rng, &CHANNELS).to_string());
        label.push(if fraud { "fraud" } else { "genuine" }.to_string());
    }

    Dataset::from_raw(
        "fraud",
        vec![
            RawColumn::continuous("amount", amount),
            RawColumn::continuous("account_age_days", age),
            RawColumn::continuous("merchant_risk", risk),
            RawColumn::continuous("prior_txn_count", prior),
            RawColumn::categorical("hour", hour),
            RawColumn::categorical("day_of_week", day),
            RawColumn::categorical("month", month),
            RawColumn::categorical("channel", channel),
        ],
        &label,
    )
}

/// Census-like mixed-kind dataset with a binary income label.
pub fn synth_census(n: usize, seed: u64) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::Validation(format!("census generator needs n >= 100, got {n}")));
    }
    const WORKCLASS: [&str; 4] = ["Private", "Self-emp", "Gov", "Other"];
    const EDUCATION: [(&str, f64); 5] = [
        ("HS-grad", 9.0),
        ("Some-college", 10.0),
        ("Bachelors", 13.0),
        ("Masters", 14.0),
        ("Doctorate", 16.0),
    ];
    const MARITAL: [&str; 4] = ["Married", "Never-married", "Divorced", "Widowed"];
    const OCCUPATION: [&str; 6] = [
        "Exec-managerial",
        "Prof-specialty",
        "Craft-repair",
        "Sales",
        "Adm-clerical",
        "Other-service",
    ];
    const RELATIONSHIP: [&str; 4] = ["Husband", "Wife", "Own-child", "Not-in-family"];
    const RACE: [&str; 3] = ["White", "Black", "Other"];
    const SEX: [&str; 2] = ["Male", "Female"];
    const COUNTRY: [&str; 3] = ["United-States", "Mexico", "Other"];

    let mut rng = seed::rng(seed);
    let fnlwgt_dist = LogNormal::<f64>::new(12.0, 0.5).expect("valid lognormal");
    let gain_dist = LogNormal::<f64>::new(8.0, 1.0).expect("valid lognormal");
    let loss_dist = LogNormal::<f64>::new(7.0, 0.5).expect("valid lognormal");
    let hours_dist = Normal::<f64>::new(40.0, 10.0).expect("valid normal");

    let mut cont: [Vec<f64>; 6] = Default::default();
    let mut cats: [Vec<String>; 8] = Default::default();
    let mut label = Vec::with_capacity(n);
    for _ in 0..n {
        let age = f64::from(rng.random_range(17u32..=90));
        let fnlwgt = fnlwgt_dist.sample(&mut rng).round();
        let (education, edu_num) = EDUCATION[rng.random_range(0..EDUCATION.len())];
        let gain = if rng.random_bool(0.1) {
            gain_dist.sample(&mut rng).round()
        } else {
            0.0
        };
        let loss = if rng.random_bool(0.05) {
            loss_dist.sample(&mut rng).round()
        } else {
            0.0
        };
        let hours = hours_dist.sample(&mut rng).round().clamp(1.0, 99.0);
        let workclass = pick(&mut rng, &WORKCLASS);
        let marital = pick(&mut rng, &MARITAL);
        let occupation = pick(&mut rng, &OCCUPATION);
        let sex = pick(&mut rng, &SEX);
        let relationship = match (marital, sex) {
            ("Married", "Male") => "Husband",
            ("Married", _) => "Wife",
            _ if age < 25.0 => "Own-child",
            _ => RELATIONSHIP[3],
        };
        let race = pick(&mut rng, &RACE);
        let country = pick(&mut rng, &COUNTRY);

        let z = -7.0
            + 0.035 * age
            + 0.30 * edu_num
            + 0.03 * hours
            + 0.0002 * gain.min(20_000.0)
            + if marital == "Married" { 1.4 } else { 0.0 }
            + if sex == "Male" { 0.4 } else { 0.0 }
            + if occupation == "Exec-managerial" || occupation == "Prof-specialty" {
                0.6
            } else {
                0.0
            };
        let p = 1.0 / (1.0 + (-z).exp());
        label.push(if rng.random_bool(p) { ">50K" } else { "<=50K" }.to_string());

        for (slot, v) in cont.iter_mut().zip([age, fnlwgt, edu_num, gain, loss, hours]) {
            slot.push(v);
        }
        for (slot, v) in cats.iter_mut().zip([
            workclass,
            education,
            marital,
            occupation,
            relationship,
            race,
            sex,
            country,
        ]) {
            slot.push(v.to_string());
        }
    }

    let [age, fnlwgt, edu_num, gain, loss, hours] = cont;
    let [workclass, education, marital, occupation, relationship, race, sex, country] = cats;
    Dataset::from_raw(
        "census_like",
        vec![
            RawColumn::continuous("age", age),
            RawColumn::categorical("workclass", workclass),
            RawColumn::continuous("fnlwgt", fnlwgt),
            RawColumn::categorical("education", education),
            RawColumn::continuous("education_num", edu_num),
            RawColumn::categorical("marital_status", marital),
            RawColumn::categorical("occupation", occupation),
            RawColumn::categorical("relationship", relationship),
            RawColumn::categorical("race", race),
            RawColumn::categorical("sex", sex),
            RawColumn::continuous("capital_gain", gain),
            RawColumn::continuous("capital_loss", loss),
            RawColumn::continuous("hours_per_week", hours),
            RawColumn::categorical("native_country", country),
        ],
        &label,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraud_shape_and_balance() {
        let ds = synth_fraud(3430, 0.5, 1).unwrap();
        assert_eq!(ds.n_rows(), 3430);
        assert_eq!(ds.features().len(), 8);
        assert_eq!(ds.class_counts(), vec![1715, 1715]);
        let ds = synth_fraud(1000, 0.5, 2).unwrap();
        assert_eq!(ds.class_counts().iter().sum::<usize>(), 1000);
        assert!(ds.class_counts().iter().all(|&c| c == 500));
    }

    #[test]
    fn fraud_rejects_degenerate_fractions() {
        assert!(synth_fraud(100, 0.001, 0).is_err());
        assert!(synth_fraud(100, 0.999, 0).is_err());
        assert!(synth_fraud(99, 0.5, 0).is_err());
        assert!(synth_fraud(100, 1.0, 0).is_err());
    }

    #[test]
    fn fraud_is_deterministic_in_seed() {
        assert_eq!(synth_fraud(200, 0.3, 9).unwrap(), synth_fraud(200, 0.3, 9).unwrap());
        assert_ne!(synth_fraud(200, 0.3, 9).unwrap().x(), synth_fraud(200, 0.3, 10).unwrap().x());
    }

    #[test]
    fn census_has_fourteen_raw_features() {
        let ds = synth_census(2000, 3).unwrap();
        let names: Vec<&str> = ds.features().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, CENSUS_RAW_FEATURES);
        assert!(ds.n_columns() > 14);
        let positives = ds.class_counts();
        assert!(positives.iter().all(|&c| c > 200), "{positives:?}");
    }
}
