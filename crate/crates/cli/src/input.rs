//! CSV ingestion for `estimate`.

use std::path::Path;

use regadj::Dataset;

use crate::CliError;

pub struct Table {
    pub data: Dataset,
    pub covariates: Vec<String>,
}

fn invalid(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("line {line}: {msg}"))
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| invalid(1, e))?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let (Some(ia), Some(iy)) = (find("a"), find("y")) else {
        return Err(invalid(1, "header must contain columns `a` and `y`"));
    };
    let iw = find("w");
    let cov_idx: Vec<usize> = (0..header.len()).filter(|&i| i != ia && i != iy && Some(i) != iw).collect();
    let covariates: Vec<String> = cov_idx.iter().map(|&i| header[i].to_string()).collect();
    if covariates.is_empty() {
        return Err(invalid(1, "no covariate columns"));
    }

    let (mut a, mut y, mut w, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            invalid(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, CliError> {
            let field = &rec[i];
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(invalid(line, format!("column `{}`: `{field}` is not a finite number", &header[i]))),
            }
        };
        a.push(match &rec[ia] {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(invalid(line, format!("column `a` must be 0 or 1, got `{other}`"))),
        });
        y.push(num(iy)?);
        if let Some(iw) = iw {
            let v = num(iw)?;
            if v <= 0.0 {
                return Err(invalid(line, format!("weight {v} is not positive")));
            }
            w.push(v);
        }
        rows.push(cov_idx.iter().map(|&i| num(i)).collect::<Result<Vec<_>, _>>()?);
    }
    if a.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let data = Dataset::from_rows(a, &rows, y).map_err(|e| CliError::Input(e.to_string()))?;
    let data = if iw.is_some() {
        data.with_weights(regadj::nalgebra::DVector::from_vec(w)).map_err(|e| CliError::Input(e.to_string()))?
    } else {
        data
    };
    Ok(Table { data, covariates })
}
