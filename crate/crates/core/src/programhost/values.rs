//! Conversion between instance data and script values, and validation of
//! what programs hand back.

use crate::domain::Domain;
use crate::instancegen::{DistanceMatrix, Instance};
use rhai::{Array, Dynamic, FLOAT, INT};

/// Desirability entries that are negative, NaN or infinite are replaced by this floor.
pub const ETA_FLOOR: f64 = 1e-10;

pub fn float_array(xs: &[f64]) -> Dynamic {
    Dynamic::from_array(xs.iter().map(|&x| Dynamic::from_float(x)).collect())
}

pub fn int_array<I: IntoIterator<Item = usize>>(xs: I) -> Dynamic {
    Dynamic::from_array(xs.into_iter().map(|x| Dynamic::from_int(x as INT)).collect())
}

pub fn matrix_value(d: &DistanceMatrix) -> Dynamic {
    Dynamic::from_array(d.rows().map(float_array).collect())
}

pub fn coords_value(coords: &[[f64; 2]]) -> Dynamic {
    Dynamic::from_array(coords.iter().map(|c| float_array(c)).collect())
}

/// Arguments of the desirability interface for an ACO-domain instance, in
/// declaration order. `None` when the instance kind does not fit the domain.
pub fn heuristic_args(domain: Domain, instance: &Instance) -> Option<Vec<Dynamic>> {
    match (domain, instance) {
        (Domain::TspAco, Instance::Euclidean(e)) => Some(vec![matrix_value(&e.distance_matrix())]),
        (Domain::CvrpAco, Instance::Routing(r)) => {
            let demands: Vec<f64> = r.demands.iter().map(|&d| d as f64).collect();
            Some(vec![
                matrix_value(&r.base.distance_matrix()),
                coords_value(&r.base.coords),
                float_array(&demands),
                Dynamic::from_float(r.capacity as FLOAT),
            ])
        }
        (Domain::OpAco, Instance::Orienteering(o)) => Some(vec![
            float_array(&o.prizes),
            matrix_value(&o.base.distance_matrix()),
            Dynamic::from_float(o.max_length),
        ]),
        (Domain::MkpAco, Instance::Knapsack(k)) => Some(vec![
            float_array(&k.values),
            Dynamic::from_array(k.weights.iter().map(|w| float_array(w)).collect()),
        ]),
        _ => None,
    }
}

fn number(v: &Dynamic) -> Option<f64> {
    v.as_float().ok().or_else(|| v.as_int().ok().map(|i| i as f64))
}

fn read_row(v: &Dynamic, n: usize, what: &str, out: &mut Vec<f64>) -> Result<(), String> {
    let arr = v
        .read_lock::<Array>()
        .ok_or_else(|| format!("{what} must be an array, found {}", v.type_name()))?;
    if arr.len() != n {
        return Err(format!("{what} has length {}, expected {n}", arr.len()));
    }
    for (j, x) in arr.iter().enumerate() {
        out.push(number(x).ok_or_else(|| {
            format!("{what}[{j}] is {}, expected a number", x.type_name())
        })?);
    }
    Ok(())
}

/// Reads an (n, n) array-of-arrays into row-major storage.
pub fn read_matrix(v: &Dynamic, n: usize) -> Result<Vec<f64>, String> {
    let rows = v
        .read_lock::<Array>()
        .ok_or_else(|| format!("heuristic must return an array of rows, found {}", v.type_name()))?;
    if rows.len() != n {
        return Err(format!("heuristic returned {} rows, expected {n}", rows.len()));
    }
    let mut out = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        read_row(row, n, &format!("row {i}"), &mut out)?;
    }
    Ok(out)
}

pub fn read_vector(v: &Dynamic, n: usize) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(n);
    read_row(v, n, "heuristic vector", &mut out)?;
    Ok(out)
}

/// Clamps malformed entries to [`ETA_FLOOR`]. Fails when nothing finite and
/// positive was returned, since the transition rule would have nothing to weigh.
pub fn sanitize(values: &mut [f64]) -> Result<usize, String> {
    let mut usable = 0;
    let mut clamped = 0;
    for x in values.iter_mut() {
        if x.is_finite() && *x >= 0.0 {
            if *x > 0.0 {
                usable += 1;
            }
        } else {
            *x = ETA_FLOOR;
            clamped += 1;
        }
    }
    if usable == 0 {
        return Err("heuristic output has no finite positive entry".into());
    }
    Ok(clamped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitation_clamps_and_rejects() {
        let mut v = vec![1.0, -2.0, f64::NAN, f64::INFINITY, 0.0];
        assert_eq!(sanitize(&mut v).unwrap(), 3);
        assert_eq!(v, vec![1.0, ETA_FLOOR, ETA_FLOOR, ETA_FLOOR, 0.0]);
        let mut bad = vec![0.0, -1.0, f64::NAN];
        assert!(sanitize(&mut bad).is_err());
    }

    #[test]
    fn matrix_shape_is_checked() {
        let ok = Dynamic::from_array(vec![float_array(&[1.0, 2.0]), float_array(&[3.0, 4.0])]);
        assert_eq!(read_matrix(&ok, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let short = Dynamic::from_array(vec![float_array(&[1.0, 2.0]), float_array(&[3.0])]);
        assert!(read_matrix(&short, 2).is_err());
        let ints = Dynamic::from_array(vec![Dynamic::from_int(1), Dynamic::from_int(2)]);
        assert_eq!(read_vector(&ints, 2).unwrap(), vec![1.0, 2.0]);
        assert!(read_vector(&Dynamic::from_int(1), 1).is_err());
    }
}
