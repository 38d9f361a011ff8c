//! Synthetic datasets for the toy experiments and CSV ingestion.

use std::path::Path;

use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::GroupLabels;
use crate::linalg::{DataMatrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub x: DataMatrix,
    /// One entry per sensitive attribute.
    pub labels: Vec<GroupLabels>,
    pub label_names: Vec<String>,
    /// Per attribute: the original value of each dense group index.
    pub label_values: Vec<Vec<String>>,
    pub feature_names: Option<Vec<String>>,
    pub tag: String,
}

impl LabeledDataset {
    fn generated(x: DataMatrix, labels: GroupLabels, label_name: &str, tag: &str) -> Self {
        let values = (0..labels.groups()).map(|g| g.to_string()).collect();
        Self {
            x,
            labels: vec![labels],
            label_names: vec![label_name.to_string()],
            label_values: vec![values],
            feature_names: None,
            tag: tag.to_string(),
        }
    }

    pub fn feature_names_or_default(&self) -> Vec<String> {
        self.feature_names
            .clone()
            .unwrap_or_else(|| (0..self.x.cols()).map(|j| format!("x{j}")).collect())
    }

    /// Writes features followed by one `label_<attr>` column per attribute.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_records(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_records(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn write_records<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let mut header = self.feature_names_or_default();
        header.extend(self.label_names.iter().map(|n| format!("label_{n}")));
        w.write_record(&header)?;
        for i in 0..self.x.rows() {
            let mut record: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            for (labels, values) in self.labels.iter().zip(&self.label_values) {
                record.push(values[labels.labels()[i]].clone());
            }
            w.write_record(&record)?;
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn dirichlet(alpha: f64, k: usize, rng: &mut Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked positive");
    let mut w: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        w.iter_mut().for_each(|v| *v /= sum);
    } else {
        // every gamma draw underflowed (tiny alpha); fall back to a vertex
        let j = rng.index(k);
        w.iter_mut().enumerate().for_each(|(i, v)| *v = f64::from(u8::from(i == j)));
    }
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypalParams {
    pub archetypes: Vec<Vec<f64>>,
    pub n: usize,
    pub alpha: f64,
    pub group_shift: Vec<f64>,
    pub noise_sd: f64,
}

/// Points drawn as Dirichlet(`alpha`) mixtures of the archetype rows plus
/// Gaussian noise. The second half of the points (group 1) is additionally
/// translated by `group_shift`.
pub fn make_archetypal_dataset(
    archetype_coords: &DataMatrix,
    n: usize,
    alpha: f64,
    group_shift: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let (k, d) = archetype_coords.shape();
    if k < 2 {
        return Err(Error::config("need at least two archetypes"));
    }
    if n < 2 {
        return Err(Error::config("need at least two points"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!("alpha = {alpha} must be positive")));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::config("noise_sd must be >= 0"));
    }
    if group_shift.len() != d {
        return Err(Error::shape(format!(
            "group shift has {} entries for {d} dimensions",
            group_shift.len()
        )));
    }
    let mut rng = Rng::new(seed);
    let first_group = n - n / 2;
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let w = dirichlet(alpha, k, &mut rng);
        let group = usize::from(i >= first_group);
        for (j, &shift) in group_shift.iter().enumerate() {
            let mut v: f64 = (0..k).map(|a| w[a] * archetype_coords.get(a, j)).sum();
            if noise_sd > 0.0 {
                v += noise_sd * standard_normal(&mut rng);
            }
            if group == 1 {
                v += shift;
            }
            values.push(v);
        }
        labels.push(group);
    }
    Ok(LabeledDataset::generated(
        DataMatrix::new(n, d, values)?,
        GroupLabels::with_groups(labels, 2)?,
        "group",
        "archetypal",
    ))
}

impl ArchetypalParams {
    /// Two-class toy defaults: three archetypes in the plane, `alpha = 1`,
    /// group 1 shifted by `(1.5, 0)`.
    pub fn two_class(n: usize) -> Self {
        Self {
            archetypes: vec![vec![0.0, 0.0], vec![0.5, 10.0], vec![-0.5, 10.0]],
            n,
            alpha: 1.0,
            group_shift: vec![1.5, 0.0],
            noise_sd: 0.05,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        let coords = DataMatrix::from_rows(&self.archetypes)?;
        let mut ds = make_archetypal_dataset(&coords, self.n, self.alpha, &self.group_shift, self.noise_sd, seed)?;
        ds.tag = "two_class".into();
        Ok(ds)
    }
}

/// The two-class toy dataset with default parameters.
pub fn two_class_toy(n: usize, seed: u64) -> LabeledDataset {
    ArchetypalParams::two_class(n).generate(seed).expect("default parameters are valid")
}

fn grid(count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| std::f64::consts::PI * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Two interleaved half circles: moon 0 at `(cos θ, sin θ)`, moon 1 at
/// `(1 − cos θ, 0.5 − sin θ)`, with `θ` on an even grid over `[0, π]`.
pub fn make_moons(n: usize, noise_sd: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::config("need at least two points"));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::config("noise_sd must be >= 0"));
    }
    let outer = n / 2;
    let inner = n - outer;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for t in grid(outer) {
        rows.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in grid(inner) {
        rows.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise_sd > 0.0 {
        let mut rng = Rng::new(seed);
        for row in &mut rows {
            for v in row.iter_mut() {
                *v += noise_sd * standard_normal(&mut rng);
            }
        }
    }
    Ok(LabeledDataset::generated(
        DataMatrix::from_rows(&rows)?,
        GroupLabels::with_groups(labels, 2)?,
        "moon",
        "moons",
    ))
}

/// Isotropic Gaussian blobs, `per_blob` points around each center row.
pub fn make_blobs(centers: &DataMatrix, per_blob: usize, sd: f64, seed: u64) -> Result<LabeledDataset> {
    let (g, d) = centers.shape();
    if g < 2 {
        return Err(Error::config("need at least two centers"));
    }
    if per_blob == 0 {
        return Err(Error::config("per_blob must be positive"));
    }
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::config(format!("sd = {sd} must be positive")));
    }
    let mut rng = Rng::new(seed);
    let mut values = Vec::with_capacity(g * per_blob * d);
    let mut labels = Vec::with_capacity(g * per_blob);
    for b in 0..g {
        for _ in 0..per_blob {
            for j in 0..d {
                values.push(centers.get(b, j) + sd * standard_normal(&mut rng));
            }
            labels.push(b);
        }
    }
    Ok(LabeledDataset::generated(
        DataMatrix::new(g * per_blob, d, values)?,
        GroupLabels::with_groups(labels, g)?,
        "blob",
        "blobs",
    ))
}

/// Default four-blob layout used by the multi-group toy experiment.
pub fn default_blob_centers() -> DataMatrix {
    DataMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![3.0, 0.0],
        vec![0.0, 3.0],
        vec![3.0, 3.0],
    ])
    .expect("static centers")
}

/// Per-column z-scores using the population standard deviation.
///
/// `names` is only used to identify a zero-variance column in the error.
pub fn standardize(x: &DataMatrix, names: &[String]) -> Result<DataMatrix> {
    let n = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd.is_nan() || sd <= 1e-12 * mean.abs().max(1.0) {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(Error::DegenerateColumn(name));
        }
        means.push(mean);
        sds.push(sd);
    }
    Ok(DataMatrix::from_fn(x.rows(), x.cols(), |r, c| (x.get(r, c) - means[c]) / sds[c]))
}

/// Reads a headered, comma-separated file.
///
/// Label columns are mapped to dense group indices in order of first
/// appearance; `label_values` records the mapping.
pub fn load_csv(
    path: impl AsRef<Path>,
    feature_columns: &[String],
    label_columns: &[String],
    standardize_features: bool,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let locate = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in {}", path.display())))
    };
    if feature_columns.is_empty() {
        return Err(Error::Schema("no feature columns selected".into()));
    }
    let feature_idx: Vec<usize> = feature_columns.iter().map(locate).collect::<Result<_>>()?;
    let label_idx: Vec<usize> = label_columns.iter().map(locate).collect::<Result<_>>()?;

    let mut values = Vec::new();
    let mut raw_labels: Vec<Vec<usize>> = vec![Vec::new(); label_idx.len()];
    let mut label_values: Vec<Vec<String>> = vec![Vec::new(); label_idx.len()];
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let row_number = line + 2;
        for (&j, name) in feature_idx.iter().zip(feature_columns) {
            let cell = record.get(j).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_number,
                column: name.clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_number,
                    column: name.clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        for (a, &j) in label_idx.iter().enumerate() {
            let cell = record.get(j).unwrap_or("").trim().to_string();
            let g = match label_values[a].iter().position(|v| *v == cell) {
                Some(g) => g,
                None => {
                    label_values[a].push(cell);
                    label_values[a].len() - 1
                }
            };
            raw_labels[a].push(g);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Schema(format!("{} has no data rows", path.display())));
    }
    let mut x = DataMatrix::new(rows, feature_idx.len(), values)?;
    if standardize_features {
        x = standardize(&x, feature_columns)?;
    }
    let labels = raw_labels
        .into_iter()
        .zip(&label_values)
        .map(|(l, v)| GroupLabels::with_groups(l, v.len()))
        .collect::<Result<_>>()?;
    let label_names = label_columns
        .iter()
        .map(|c| c.strip_prefix("label_").unwrap_or(c).to_string())
        .collect();
    Ok(LabeledDataset {
        x,
        labels,
        label_names,
        label_values,
        feature_names: Some(feature_columns.to_vec()),
        tag: path
            .file_stem()
            .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use std::io::Write;

    /// Barycentric coordinates of `p` against `d + 1` affinely independent vertices.
    fn barycentric(vertices: &DataMatrix, p: &[f64]) -> Vec<f64> {
        let (k, d) = vertices.shape();
        assert_eq!(k, d + 1);
        let mut a = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for j in 0..d {
            for v in 0..k {
                a[(j, v)] = vertices.get(v, j);
            }
            b[j] = p[j];
        }
        for v in 0..k {
            a[(d, v)] = 1.0;
        }
        b[d] = 1.0;
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn noiseless_points_lie_in_hull() {
        let tri = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.5], vec![1.0, 2.5]]).unwrap();
        let ds = make_archetypal_dataset(&tri, 300, 0.7, &[0.0, 0.0], 0.0, 5).unwrap();
        for i in 0..ds.x.rows() {
            assert!(barycentric(&tri, ds.x.row(i)).iter().all(|&w| w >= -1e-12));
        }
        let tet = DataMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.5],
        ])
        .unwrap();
        let ds = make_archetypal_dataset(&tet, 200, 1.0, &[0.0; 3], 0.0, 6).unwrap();
        for i in 0..ds.x.rows() {
            assert!(barycentric(&tet, ds.x.row(i)).iter().all(|&w| w >= -1e-12));
        }
    }

    #[test]
    fn large_alpha_concentrates_at_centroid() {
        let tri = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![2.0, 3.0]]).unwrap();
        let centroid = [2.0, 1.0];
        let dist = |p: &[f64]| ((p[0] - centroid[0]).powi(2) + (p[1] - centroid[1]).powi(2)).sqrt();
        let ds = make_archetypal_dataset(&tri, 400, 100.0, &[0.0, 0.0], 0.0, 1).unwrap();
        let mean_pt = ds.x.row_iter().map(dist).sum::<f64>() / 400.0;
        let mean_arch = tri.row_iter().map(dist).sum::<f64>() / 3.0;
        assert!(mean_pt < mean_arch);
    }

    #[test]
    fn archetypal_generator_contract() {
        let tri = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = make_archetypal_dataset(&tri, 50, 1.0, &[1.5, 0.0], 0.1, 9).unwrap();
        let b = make_archetypal_dataset(&tri, 50, 1.0, &[1.5, 0.0], 0.1, 9).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        assert_eq!(a.labels[0].counts(), vec![25, 25]);
        assert!(matches!(
            make_archetypal_dataset(&tri, 50, 0.0, &[0.0, 0.0], 0.1, 9),
            Err(Error::InvalidConfig(_))
        ));
        assert!(make_archetypal_dataset(&tri, 50, 1.0, &[0.0], 0.1, 9).is_err());
    }

    #[test]
    fn moons_formula_points() {
        let ds = make_moons(300, 0.0, 0).unwrap();
        assert_eq!(ds.x.row(0), &[1.0, 0.0]);
        let counts = ds.labels[0].counts();
        assert!(counts[0].abs_diff(counts[1]) <= 1);
        // an odd grid puts θ = π/2 at its middle index
        let odd = make_moons(10, 0.0, 0).unwrap();
        let moon1 = odd.labels[0].members(1);
        let mid = odd.x.row(moon1[2]);
        assert!((mid[0] - 1.0).abs() < 1e-15 && (mid[1] + 0.5).abs() < 1e-15);
        let noisy = make_moons(7, 0.05, 3).unwrap();
        assert_eq!(noisy, make_moons(7, 0.05, 3).unwrap());
    }

    #[test]
    fn blobs_contract() {
        let centers = default_blob_centers();
        let tight = make_blobs(&centers, 20, 1e-9, 1).unwrap();
        for i in 0..tight.x.rows() {
            let c = centers.row(tight.labels[0].labels()[i]);
            assert!(tight.x.row(i).iter().zip(c).all(|(a, b)| (a - b).abs() <= 1e-6));
        }
        let per = 100;
        let sd = 0.6;
        let ds = make_blobs(&centers, per, sd, 2).unwrap();
        assert_eq!(ds.labels[0].labels(), &(0..4 * per).map(|i| i / per).collect::<Vec<_>>()[..]);
        for b in 0..4 {
            let members = ds.x.select_rows(&ds.labels[0].members(b)).unwrap();
            for j in 0..2 {
                let mean = members.column(j).iter().sum::<f64>() / per as f64;
                assert!((mean - centers.get(b, j)).abs() <= 4.0 * sd / (per as f64).sqrt());
            }
        }
        assert!(make_blobs(&centers.select_rows(&[0]).unwrap(), 5, 0.5, 1).is_err());
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn csv_loading_maps_labels_in_first_appearance_order() {
        let f = write_temp("a,b,g\n1.0,2.0,m\n3.0,4.5,f\n-1,0,m\n");
        let ds = load_csv(f.path(), &names(&["a", "b"]), &names(&["g"]), false).unwrap();
        assert_eq!(ds.x.shape(), (3, 2));
        assert_eq!(ds.x.row(1), &[3.0, 4.5]);
        assert_eq!(ds.labels[0].labels(), &[0, 1, 0]);
        assert_eq!(ds.label_values[0], names(&["m", "f"]));
    }

    #[test]
    fn csv_errors() {
        let f = write_temp("a,b,g\n1.0,x,m\n2.0,3.0,f\n");
        match load_csv(f.path(), &names(&["a", "b"]), &names(&["g"]), false) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_csv(f.path(), &names(&["a", "zzz"]), &names(&["g"]), false),
            Err(Error::Schema(_))
        ));
        let flat = write_temp("a,b,g\n1.0,5,m\n2.0,5,f\n3.0,5,f\n");
        match load_csv(flat.path(), &names(&["a", "b"]), &names(&["g"]), true) {
            Err(Error::DegenerateColumn(c)) => assert_eq!(c, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standardization_properties() {
        let ds = two_class_toy(100, 4);
        let names = ds.feature_names_or_default();
        let z = standardize(&ds.x, &names).unwrap();
        for j in 0..z.cols() {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / 100.0;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
            assert!(mean.abs() <= 1e-12 && (sd - 1.0).abs() <= 1e-12);
        }
        let twice = standardize(&z, &names).unwrap();
        assert!(twice.sub(&z).unwrap().values().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn csv_round_trip() {
        let ds = two_class_toy(40, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        ds.write_csv(&path).unwrap();
        let back = load_csv(&path, &names(&["x0", "x1"]), &names(&["label_group"]), false).unwrap();
        assert!(back.x.sub(&ds.x).unwrap().values().iter().all(|v| v.abs() <= 1e-12));
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.label_names, names(&["group"]));
    }
}
