use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::{Domain, Shape};
use super::field::ScalarField;
use crate::error::{invalid, Error, Result};
use crate::report::{fmt17, to_json_string};

/// JSON envelope of a field: `{domain, h, dirichlet, values}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FieldEnvelope {
    pub domain: Shape,
    pub h: f64,
    #[serde(default)]
    pub dirichlet: bool,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn to_envelope(&self) -> FieldEnvelope {
        FieldEnvelope {
            domain: self.domain().shape().clone(),
            h: self.domain().h(),
            dirichlet: self.is_dirichlet(),
            values: self.values().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(&self.to_envelope())
    }

    /// Rebuilds the domain from the envelope and attaches the values.
    pub fn from_json(s: &str) -> Result<Self> {
        let env: FieldEnvelope = serde_json::from_str(s)?;
        let dom = Domain::new(env.domain, env.h)?;
        ScalarField::new(dom, env.values, env.dirichlet)
    }

    /// One row per node: coordinate columns then `value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dom = self.domain();
        let names = dom.coord_names();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = names.to_vec();
        header.push("value");
        out.write_record(&header)?;
        for (c, v) in dom.coords().iter().zip(self.values()) {
            let mut row: Vec<String> = c[..names.len()].iter().map(|x| fmt17(*x)).collect();
            row.push(fmt17(*v));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`ScalarField::write_csv`] onto `domain`, checking that the
    /// coordinates match the grid.
    pub fn read_csv<R: Read>(domain: Arc<Domain>, r: R, dirichlet: bool) -> Result<Self> {
        let ncoord = domain.coord_names().len();
        let mut rdr = csv::Reader::from_reader(r);
        let mut values = Vec::with_capacity(domain.num_nodes());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != ncoord + 1 {
                return invalid(format!("row {i}: expected {} columns, got {}", ncoord + 1, rec.len()));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("row {i}: {e}")))
            };
            let c = domain.coords().get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("more rows than the {} grid nodes", domain.num_nodes()))
            })?;
            for k in 0..ncoord {
                let x = parse(&rec[k])?;
                if (x - c[k]).abs() > 1e-12 * (1.0 + c[k].abs()) {
                    return invalid(format!("row {i}: coordinate {x} does not match grid value {}", c[k]));
                }
            }
            values.push(parse(&rec[ncoord])?);
        }
        ScalarField::new(domain, values, dirichlet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_and_json_round_trip_bitwise(vals in proptest::collection::vec(-1e6f64..1e6, 9)) {
            let d = Domain::rectangle(2.0, 2.0, 2, 2).unwrap();
            let f = ScalarField::new(d.clone(), vals, false).unwrap();

            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let g = ScalarField::read_csv(d, buf.as_slice(), false).unwrap();
            prop_assert_eq!(f.values(), g.values());

            let h = ScalarField::from_json(&f.to_json().unwrap()).unwrap();
            prop_assert_eq!(f.values(), h.values());
        }
    }

    #[test]
    fn csv_header_per_shape() {
        let b = Domain::ball(1.0, 3, 4).unwrap();
        let f = ScalarField::zeros(b);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,value\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn csv_with_wrong_coordinates_is_rejected() {
        let d = Domain::interval(1.0, 2).unwrap();
        let text = "x,value\n0,0\n0.7,1\n1,0\n";
        assert!(ScalarField::read_csv(d, text.as_bytes(), true).is_err());
    }
}
