//! Post-training evaluation against fixed evaluation rays and oracle fronts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypervolume::{filter_nondominated, hv};
use crate::network::Hypernetwork;
use crate::numerics::Rng;
use crate::preference::PreferenceVector;
use crate::problems::{eval_losses, oracle_front, Problem, Split, Toy};
use crate::solver::cosine;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Largest change between successive oracle refinements that counts as converged.
pub const ORACLE_TOLERANCE: f64 = 1e-4;
const ORACLE_MAX_DOUBLINGS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub schema_version: u32,
    pub problem: String,
    pub ray_count: usize,
    pub reference: Vec<f64>,
    pub rays: Vec<Vec<f64>>,
    /// One loss vector per ray, dominated ones included.
    pub raw_front: Vec<Vec<f64>>,
    pub nondominated_mask: Vec<bool>,
    pub nondominated_front: Vec<Vec<f64>>,
    pub hv: f64,
    pub oracle_hv: Option<f64>,
    pub hv_ratio: Option<f64>,
    pub cosine_similarity: Vec<f64>,
}

impl EvalReport {
    /// Assembles a report from per-ray loss vectors.
    pub fn from_losses(
        problem: &str,
        rays: &[PreferenceVector],
        losses: Vec<Vec<f64>>,
        reference: &[f64],
    ) -> Result<Self> {
        let mask = filter_nondominated(&losses)?;
        let value = hv(&losses, reference)?;
        let nondominated_front = losses
            .iter()
            .zip(&mask)
            .filter(|(_, k)| **k)
            .map(|(l, _)| l.clone())
            .collect();
        let cosine_similarity = rays
            .iter()
            .zip(&losses)
            .map(|(r, l)| cosine(r.weights(), l))
            .collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            problem: problem.to_string(),
            ray_count: rays.len(),
            reference: reference.to_vec(),
            rays: rays.iter().map(|r| r.weights().to_vec()).collect(),
            raw_front: losses,
            nondominated_mask: mask,
            nondominated_front,
            hv: value,
            oracle_hv: None,
            hv_ratio: None,
            cosine_similarity,
        })
    }

    pub fn with_oracle(mut self, oracle_hv: f64) -> Self {
        self.oracle_hv = Some(oracle_hv);
        self.hv_ratio = Some(self.hv / oracle_hv);
        self
    }

    pub fn mean_cosine(&self) -> f64 {
        let n = self.cosine_similarity.len().max(1) as f64;
        self.cosine_similarity.iter().sum::<f64>() / n
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(s)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported report schema_version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Front CSV: `ray_index,r_1..r_J,L_1..L_J,nondominated`.
    pub fn write_front_csv<W: Write>(&self, writer: W) -> Result<()> {
        let j = self.reference.len();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["ray_index".to_string()];
        header.extend((1..=j).map(|k| format!("r_{k}")));
        header.extend((1..=j).map(|k| format!("L_{k}")));
        header.push("nondominated".into());
        w.write_record(&header)?;
        for (i, ((r, l), nd)) in self
            .rays
            .iter()
            .zip(&self.raw_front)
            .zip(&self.nondominated_mask)
            .enumerate()
        {
            let mut rec = vec![i.to_string()];
            rec.extend(r.iter().map(f64::to_string));
            rec.extend(l.iter().map(f64::to_string));
            rec.push(nd.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss vectors of `theta = h(r, phi)` in eval mode, one per ray.
///
/// Tabular problems are scored on `data` (the test split when `None`).
pub fn evaluate_losses(
    hn: &Hypernetwork,
    problem: &Problem,
    rays: &[PreferenceVector],
    data: Option<&Split>,
) -> Result<Vec<Vec<f64>>> {
    let j = problem.objectives();
    let split = match problem {
        Problem::Tabular(tp) => Some(data.unwrap_or(&tp.dataset.test)),
        Problem::Toy(_) => None,
    };
    let batch = split.map(Split::full);
    // eval mode never draws from the rng
    let mut rng = Rng::new(0);
    rays.iter()
        .map(|r| {
            if r.dim() != j {
                return Err(Error::dims("evaluation ray", j, r.dim()));
            }
            let (theta, _) = hn.generate_target(r, &mut rng, false)?;
            Ok(eval_losses(problem, theta.as_slice(), batch.as_ref())?.values)
        })
        .collect()
}

/// Evaluates the hypernetwork on `rays` against the canonical `reference`.
pub fn evaluate(
    hn: &Hypernetwork,
    problem: &Problem,
    rays: &[PreferenceVector],
    reference: &[f64],
    data: Option<&Split>,
) -> Result<EvalReport> {
    let losses = evaluate_losses(hn, problem, rays, data)?;
    EvalReport::from_losses(problem.name(), rays, losses, reference)
}

/// Hypervolume of the true Pareto front, refined by doubling `resolution`
/// until successive values differ by less than [`ORACLE_TOLERANCE`].
///
/// Two-objective fronts use the dense nondominated sample. The three-objective
/// sphere front integrates the volume it encloses with the ideal point.
pub fn oracle_hv(problem: &Problem, reference: &[f64], resolution: usize) -> Result<f64> {
    let toy = match problem {
        Problem::Toy(t) => *t,
        Problem::Tabular(_) => {
            return Err(Error::Unsupported {
                problem: problem.name().into(),
                what: "no analytic Pareto front".into(),
            })
        }
    };
    if reference.len() != toy.objectives() {
        return Err(Error::dims("oracle reference", toy.objectives(), reference.len()));
    }
    let at = |n: usize| -> Result<f64> {
        match toy {
            Toy::Sphere => sphere_hv(reference, n),
            _ => Ok(oracle_front(problem, n, reference)?.hv),
        }
    };
    let mut n = resolution.max(2);
    let mut prev = at(n)?;
    for _ in 0..ORACLE_MAX_DOUBLINGS {
        n *= 2;
        let next = at(n)?;
        if (next - prev).abs() < ORACLE_TOLERANCE {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Data(format!(
        "oracle hypervolume did not converge to {ORACLE_TOLERANCE} by resolution {n}"
    )))
}

/// Box volume minus the region between the ideal point and the front, with
/// that region integrated as a cone over the front parameterization:
/// `V = 1/3 * integral |f . (df/du x df/dv)| du dv` (midpoint rule).
fn sphere_hv(reference: &[f64], n: usize) -> Result<f64> {
    if reference.iter().any(|r| *r < 1.0) {
        return Err(Error::InvalidArgument(
            "sphere oracle needs a reference point >= 1 in every objective".into(),
        ));
    }
    let toy = Toy::Sphere;
    let h = 1.0 / n as f64;
    let mut enclosed = 0.0;
    let mut theta = vec![0.5; toy.theta_dim()];
    for a in 0..n {
        for b in 0..n {
            theta[0] = (a as f64 + 0.5) * h;
            theta[1] = (b as f64 + 0.5) * h;
            let (f, jac) = toy.eval(&theta)?;
            let fu = [jac[0][0], jac[1][0], jac[2][0]];
            let fv = [jac[0][1], jac[1][1], jac[2][1]];
            let cross = [
                fu[1] * fv[2] - fu[2] * fv[1],
                fu[2] * fv[0] - fu[0] * fv[2],
                fu[0] * fv[1] - fu[1] * fv[0],
            ];
            enclosed += (f[0] * cross[0] + f[1] * cross[1] + f[2] * cross[2]).abs();
        }
    }
    enclosed *= h * h / 3.0;
    Ok(reference.iter().product::<f64>() - enclosed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_hypernet, HypernetShape};
    use crate::preference::test_rays;

    #[test]
    fn sphere_enclosed_volume_is_octant() {
        let v = sphere_hv(&[2.0, 2.0, 2.0], 200).unwrap();
        assert!((v - (8.0 - std::f64::consts::PI / 6.0)).abs() < 1e-5, "{v}");
    }

    #[test]
    fn report_json_round_trip() {
        let problem = Problem::Toy(Toy::Convex);
        let hn = init_hypernet(problem.target_spec(), 2, &HypernetShape::default(), &mut Rng::new(0)).unwrap();
        let rays = test_rays(2, 7).unwrap();
        let report = evaluate(&hn, &problem, &rays, &[2.0, 2.0], None).unwrap().with_oracle(3.5);
        let back = EvalReport::from_json_str(&report.to_json_string().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn ray_dimension_checked() {
        let problem = Problem::Toy(Toy::Convex);
        let hn = init_hypernet(problem.target_spec(), 2, &HypernetShape::default(), &mut Rng::new(0)).unwrap();
        let rays = test_rays(3, 3).unwrap();
        assert!(evaluate(&hn, &problem, &rays, &[2.0, 2.0], None).is_err());
    }

    #[test]
    fn front_csv_layout() {
        let rays = test_rays(2, 3).unwrap();
        let losses = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]];
        let report = EvalReport::from_losses("p1", &rays, losses, &[2.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        report.write_front_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ray_index,r_1,r_2,L_1,L_2,nondominated");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(",1,1,false"));
        assert!(!text.contains('\r'));
    }
}
