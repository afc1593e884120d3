//! Point-cloud CSV ingestion.
//!
//! One point per row, comma separated, `.` decimal point. Lines starting with `#` are
//! comments. The first row is a header when none of its cells is a number; a header whose
//! last column is `weight` marks a weight column. Hyperboloid rows carry the time
//! coordinate `t` in the last coordinate column; it is recomputed from the spatial part.

use std::path::Path;

use bernergy::{DiscreteSignedMeasure, Point, Space};

use crate::error::{CliError, ParseKind};

/// Points read from one file, with optional per-row weights.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub weights: Option<Vec<f64>>,
}

impl PointCloud {
    /// The weighted measure if a weight column was present, otherwise the empirical
    /// probability measure.
    pub fn measure(&self) -> bernergy::Result<DiscreteSignedMeasure> {
        match &self.weights {
            Some(w) => DiscreteSignedMeasure::new(self.points.clone(), w.clone()),
            None => DiscreteSignedMeasure::empirical(self.points.clone()),
        }
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Read a CSV file from disk. `weight_column` forces the last column to be read as
/// weights even without a header.
pub fn read_pointcloud(path: &Path, space: Space, weight_column: bool) -> Result<PointCloud, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_pointcloud(&text, space, weight_column).map_err(|e| e.with_path(path))
}

pub fn parse_pointcloud(text: &str, space: Space, weight_column: bool) -> Result<PointCloud, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let parse_error = |kind, line: u64, message: String| CliError::Parse {
        kind,
        path: None,
        line,
        message,
    };

    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut width: Option<usize> = None;
    let mut weights_from_header = false;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(ParseKind::Malformed, 0, e.to_string()))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if width.is_none() && rows.is_empty() && cells.iter().all(Option::is_none) {
            // header row
            weights_from_header = record.iter().last().is_some_and(|c| c.eq_ignore_ascii_case("weight"));
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_error(
                ParseKind::Ragged,
                line,
                format!("expected {expected} columns, found {}", record.len()),
            ));
        }
        if let Some(col) = cells.iter().position(Option::is_none) {
            return Err(parse_error(
                ParseKind::NonNumeric,
                line,
                format!("column {} is not a finite number: `{}`", col + 1, &record[col]),
            ));
        }
        rows.push((line, cells.into_iter().map(|c| c.expect("checked above")).collect()));
    }
    if rows.is_empty() {
        return Err(parse_error(ParseKind::Empty, 0, "no data rows".into()));
    }

    let has_weights = weight_column || weights_from_header;
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = has_weights.then(|| Vec::with_capacity(rows.len()));
    for (line, mut row) in rows {
        if let Some(w) = weights.as_mut() {
            w.push(row.pop().expect("nonempty row"));
        }
        let needed = if space == Space::Hyperboloid { 2 } else { 1 };
        if row.len() < needed {
            return Err(parse_error(
                ParseKind::Ragged,
                line,
                format!("{} points need at least {needed} coordinate columns", space.name()),
            ));
        }
        let point = Point::from_ambient(space, row)
            .map_err(|e| parse_error(ParseKind::InvalidPoint, line, e.to_string()))?;
        points.push(point);
    }
    Ok(PointCloud { points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(r: Result<PointCloud, CliError>) -> ParseKind {
        match r {
            Err(CliError::Parse { kind, .. }) => kind,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plain_rows() {
        let c = parse_pointcloud("0\n1\n", Space::Euclidean, false).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[1].coords(), &[1.0]);
        assert!(c.weights.is_none());
    }

    #[test]
    fn weight_column_by_flag_and_header() {
        let c = parse_pointcloud("0,0,1\n3,4,1\n", Space::Euclidean, true).unwrap();
        assert_eq!(c.weights, Some(vec![1.0, 1.0]));
        assert_eq!(c.points[1].coords(), &[3.0, 4.0]);
        let c = parse_pointcloud("# comment\nx,y,weight\n0,0,2\n3,4,-2\n", Space::Euclidean, false).unwrap();
        assert_eq!(c.weights, Some(vec![2.0, -2.0]));
        let c = parse_pointcloud("x,y\n0,0\n3,4\n", Space::Euclidean, false).unwrap();
        assert!(c.weights.is_none());
    }

    #[test]
    fn errors_are_distinguished() {
        assert_eq!(kind(parse_pointcloud("1,2\n3\n", Space::Euclidean, false)), ParseKind::Ragged);
        assert_eq!(kind(parse_pointcloud("1,2\n3,x\n", Space::Euclidean, false)), ParseKind::NonNumeric);
        assert_eq!(kind(parse_pointcloud("1,inf\n", Space::Euclidean, false)), ParseKind::NonNumeric);
        assert_eq!(kind(parse_pointcloud("", Space::Euclidean, false)), ParseKind::Empty);
        assert_eq!(kind(parse_pointcloud("# only\nx,y\n", Space::Euclidean, false)), ParseKind::Empty);
        assert_eq!(kind(parse_pointcloud("0,0\n", Space::Sphere, false)), ParseKind::InvalidPoint);
    }

    #[test]
    fn hyperboloid_time_is_renormalized() {
        let c = parse_pointcloud("3,4,7\n", Space::Hyperboloid, false).unwrap();
        assert_eq!(c.points[0].coords(), &[3.0, 4.0]);
        assert_eq!(c.points[0].t(), Some(26f64.sqrt()));
        assert_eq!(kind(parse_pointcloud("1,-1\n", Space::Hyperboloid, false)), ParseKind::InvalidPoint);
    }
}
