//! Full-image inference and bicubic-versus-network evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{load_ppm, psnr, upscale2, ImageRGB};
use crate::model::Network;
use crate::tensor::Tensor;

/// Doubles a noisy low-resolution image: bicubic upscale, then subtract the
/// predicted residual and clamp to `[0, 1]`. The network must be in infer
/// mode.
pub fn infer_image(net: &Network<f32>, lowres: &ImageRGB) -> Result<ImageRGB> {
    let up = upscale2(lowres)?;
    let x: Tensor<f32> = up.to_tensor();
    let residual = net.predict_residual(&x)?;
    let values = up
        .values()
        .iter()
        .zip(residual.as_slice())
        .map(|(&u, &r)| u - r as f64)
        .collect();
    ImageRGB::new(up.height(), up.width(), values)
}

/// One clean / degraded pair to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub name: String,
    pub clean: PathBuf,
    pub degraded: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalOutcome {
    Scored { bicubic_psnr: f64, net_psnr: f64 },
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub outcome: EvalOutcome,
}

impl EvalRow {
    pub fn gain(&self) -> Option<f64> {
        match self.outcome {
            EvalOutcome::Scored {
                bicubic_psnr,
                net_psnr,
            } => Some(net_psnr - bicubic_psnr),
            EvalOutcome::Failed(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn scored(&self) -> impl Iterator<Item = (&str, f64, f64)> {
        self.rows.iter().filter_map(|r| match r.outcome {
            EvalOutcome::Scored {
                bicubic_psnr,
                net_psnr,
            } => Some((r.name.as_str(), bicubic_psnr, net_psnr)),
            EvalOutcome::Failed(_) => None,
        })
    }

    /// Mean of `net - bicubic` over scored rows; `None` if nothing scored.
    pub fn mean_gain(&self) -> Option<f64> {
        let gains: Vec<f64> = self.rows.iter().filter_map(EvalRow::gain).collect();
        (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows.iter().filter_map(|r| match &r.outcome {
            EvalOutcome::Failed(msg) => Some((r.name.as_str(), msg.as_str())),
            EvalOutcome::Scored { .. } => None,
        })
    }

    /// `image,bicubic_psnr,net_psnr,gain` plus a `mean` row; failed rows
    /// carry the message in place of numbers.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("image,bicubic_psnr,net_psnr,gain\n");
        for r in &self.rows {
            let name = csv_field(&r.name);
            match &r.outcome {
                EvalOutcome::Scored {
                    bicubic_psnr,
                    net_psnr,
                } => writeln!(
                    s,
                    "{name},{bicubic_psnr},{net_psnr},{}",
                    net_psnr - bicubic_psnr
                )
                .unwrap(),
                EvalOutcome::Failed(msg) => {
                    writeln!(s, "{name},error,error,{}", csv_field(msg)).unwrap()
                }
            }
        }
        if let Some(g) = self.mean_gain() {
            writeln!(s, "mean,,,{g}").unwrap();
        }
        s
    }

    /// Aligned table for terminals.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = format!(
            "{:<width$}  {:>12}  {:>12}  {:>8}\n",
            "image", "bicubic (dB)", "network (dB)", "gain"
        );
        for r in &self.rows {
            match &r.outcome {
                EvalOutcome::Scored {
                    bicubic_psnr,
                    net_psnr,
                } => writeln!(
                    s,
                    "{:<width$}  {bicubic_psnr:>12.2}  {net_psnr:>12.2}  {:>+8.2}",
                    r.name,
                    net_psnr - bicubic_psnr
                )
                .unwrap(),
                EvalOutcome::Failed(msg) => {
                    writeln!(s, "{:<width$}  skipped: {msg}", r.name).unwrap()
                }
            }
        }
        match self.mean_gain() {
            Some(g) => {
                writeln!(s, "{:<width$}  {:>12}  {:>12}  {g:>+8.2}", "mean", "", "").unwrap()
            }
            None => writeln!(s, "no image could be scored").unwrap(),
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scores one pair of in-memory images.
pub fn eval_images(
    net: &Network<f32>,
    clean: &ImageRGB,
    degraded: &ImageRGB,
) -> Result<EvalOutcome> {
    if (clean.height(), clean.width()) != (2 * degraded.height(), 2 * degraded.width()) {
        return Err(Error::Size(format!(
            "clean image is {}x{}, expected twice the degraded {}x{}",
            clean.width(),
            clean.height(),
            degraded.width(),
            degraded.height()
        )));
    }
    let bicubic_psnr = psnr(clean, &upscale2(degraded)?)?;
    let net_psnr = psnr(clean, &infer_image(net, degraded)?)?;
    Ok(EvalOutcome::Scored {
        bicubic_psnr,
        net_psnr,
    })
}

/// Scores every pair; a pair that cannot be read or whose sizes do not
/// match becomes a failed row instead of aborting the run.
pub fn eval(net: &Network<f32>, pairs: &[EvalPair]) -> EvalReport {
    let rows = pairs
        .iter()
        .map(|p| {
            let outcome = (|| {
                let clean = load_ppm(&p.clean)?;
                let degraded = load_ppm(&p.degraded)?;
                eval_images(net, &clean, &degraded)
            })();
            EvalRow {
                name: p.name.clone(),
                outcome: outcome.unwrap_or_else(|e| EvalOutcome::Failed(e.to_string())),
            }
        })
        .collect();
    EvalReport { rows }
}

/// Pairs files with the same name in `clean_dir` and `degraded_dir`.
pub fn pair_directories(clean_dir: &Path, degraded_dir: &Path) -> Result<Vec<EvalPair>> {
    let clean = crate::dataset::list_images(clean_dir)?;
    let mut pairs = Vec::new();
    for path in clean {
        let file = path.file_name().expect("listed files have names");
        pairs.push(EvalPair {
            name: file.to_string_lossy().into_owned(),
            degraded: degraded_dir.join(file),
            clean: path,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::downscale2;
    use crate::model::SurdcnnConfig;
    use crate::rng::SeededRng;
    use crate::{InitScheme, Mode};

    fn zero_net() -> Network<f32> {
        let mut net = Network::zeroed(SurdcnnConfig::scaled(3, 4)).unwrap();
        net.set_mode(Mode::Infer);
        net
    }

    fn picture(h: usize, w: usize) -> ImageRGB {
        ImageRGB::from_fn(h, w, |c, i, j| {
            0.5 + 0.4 * ((i * 3 + j * 5 + c) as f64 * 0.3).sin()
        })
        .unwrap()
    }

    #[test]
    fn zero_network_reproduces_bicubic() {
        let lr = picture(7, 11);
        let out = infer_image(&zero_net(), &lr).unwrap();
        assert_eq!((out.height(), out.width()), (14, 22));
        assert_eq!(out, upscale2(&lr).unwrap());
    }

    #[test]
    fn output_doubles_size_and_is_deterministic() {
        let mut net = Network::build(
            SurdcnnConfig::scaled(3, 4),
            InitScheme::He,
            &mut SeededRng::new(2),
        )
        .unwrap();
        net.set_mode(Mode::Infer);
        let lr = picture(5, 3);
        let a = infer_image(&net, &lr).unwrap();
        assert_eq!((a.height(), a.width()), (10, 6));
        assert_eq!(a, infer_image(&net, &lr).unwrap());
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn eval_rows_and_mismatch() {
        let net = zero_net();
        let clean = picture(16, 12);
        let lr = downscale2(&clean).unwrap();
        match eval_images(&net, &clean, &lr).unwrap() {
            EvalOutcome::Scored {
                bicubic_psnr,
                net_psnr,
            } => assert_eq!(bicubic_psnr, net_psnr),
            o => panic!("{o:?}"),
        }
        assert!(matches!(
            eval_images(&net, &picture(15, 12), &lr),
            Err(Error::Size(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let (c, d) = (dir.path().join("clean"), dir.path().join("lr"));
        std::fs::create_dir_all(&c).unwrap();
        std::fs::create_dir_all(&d).unwrap();
        crate::imaging::save_ppm(&clean, c.join("a.ppm")).unwrap();
        crate::imaging::save_ppm(&lr, d.join("a.ppm")).unwrap();
        crate::imaging::save_ppm(&picture(10, 10), c.join("b.ppm")).unwrap();
        crate::imaging::save_ppm(&lr, d.join("b.ppm")).unwrap();
        let report = eval(&net, &pair_directories(&c, &d).unwrap());
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.mean_gain(), Some(0.0));
        assert_eq!(report.failures().count(), 1);
        let csv = report.to_csv();
        assert!(csv.starts_with("image,bicubic_psnr,net_psnr,gain\n"));
        assert!(csv.contains("b.ppm,error,error,"));
        assert!(report.to_table().contains("skipped"));
    }
}
