//! Datasets shipped with the crate as CSV fixtures.

use super::{load_csv_str, Dataset, Schema};
use crate::error::{Error, Result};

pub const BUNDLED_NAMES: [&str; 3] = ["iris", "wine", "breast_cancer"];

const IRIS_CSV: &str = include_str!("../../data/iris.csv");
const IRIS_SCHEMA: &str = include_str!("../../data/iris.schema.toml");
const WINE_CSV: &str = include_str!("../../data/wine.csv");
const WINE_SCHEMA: &str = include_str!("../../data/wine.schema.toml");
const CANCER_CSV: &str = include_str!("../../data/breast_cancer.csv");
const CANCER_SCHEMA: &str = include_str!("../../data/breast_cancer.schema.toml");

fn load(csv: &str, schema: &str, name: &str) -> Result<Dataset> {
    load_csv_str(csv, &Schema::from_toml_str(schema)?, name)
}

/// Fisher's Iris: 150 rows, 4 continuous features, 3 classes.
pub fn iris() -> Dataset {
    load(IRIS_CSV, IRIS_SCHEMA, "iris").expect("bundled iris fixture is valid")
}

/// UCI Wine: 178 rows, 13 continuous features, 3 classes.
pub fn wine() -> Dataset {
    load(WINE_CSV, WINE_SCHEMA, "wine").expect("bundled wine fixture is valid")
}

/// Wisconsin diagnostic breast cancer: 569 rows, 30 continuous features, 2 classes.
pub fn breast_cancer() -> Dataset {
    load(CANCER_CSV, CANCER_SCHEMA, "breast_cancer").expect("bundled breast cancer fixture is valid")
}

pub fn bundled(name: &str) -> Result<Dataset> {
    match name {
        "iris" => Ok(iris()),
        "wine" => Ok(wine()),
        "breast_cancer" | "cancer" => Ok(breast_cancer()),
        other => Err(Error::Config(format!("unknown bundled dataset '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shapes() {
        let iris = iris();
        assert_eq!((iris.n_rows(), iris.n_columns(), iris.class_count()), (150, 4, 3));
        let wine = wine();
        assert_eq!((wine.n_rows(), wine.n_columns(), wine.class_count()), (178, 13, 3));
        let bc = breast_cancer();
        assert_eq!((bc.n_rows(), bc.n_columns(), bc.class_count()), (569, 30, 2));
    }

    #[test]
    fn iris_columns_are_named() {
        assert_eq!(
            iris().column_names(),
            vec!["sepal length", "sepal width", "petal length", "petal width"]
        );
    }
}
