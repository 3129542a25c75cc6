use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use ndarray::Array2;

use super::{Denoiser, ModuleFault};
use crate::deconv::io::{read_raster, write_pgm16};
use crate::error::{FimaError, Result};

/// Runs an external program as a denoiser.
///
/// The iterate is written as a 16-bit PGM (intensities clamped to `[0, 1]`),
/// `{in}` and `{out}` in the template are replaced by the file paths and the
/// command is run through `sh -c`. Any failure is recoverable: the solver
/// falls back to its analytic step for that iteration.
pub struct ExternalDenoiser {
    template: String,
    timeout: Duration,
    // one invocation at a time; the temp dir is owned by the call
    lock: Mutex<()>,
}

impl ExternalDenoiser {
    pub fn new(template: &str) -> Result<Self> {
        if !template.contains("{in}") || !template.contains("{out}") {
            return Err(FimaError::InvalidArgument(format!(
                "external denoiser template must contain {{in}} and {{out}}: `{template}`"
            )));
        }
        Ok(Self { template: template.to_string(), timeout: Duration::from_secs(30), lock: Mutex::new(()) })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn run(&self, image: &Array2<f64>) -> std::result::Result<Array2<f64>, String> {
        let _guard = self.lock.lock().map_err(|_| "external denoiser lock poisoned".to_string())?;
        let dir = tempfile::tempdir().map_err(|e| format!("tempdir: {e}"))?;
        let input = dir.path().join("in.pgm");
        let output = dir.path().join("out.pgm");
        write_pgm16(&input, image).map_err(|e| format!("writing input: {e}"))?;
        let cmd = self
            .template
            .replace("{in}", &input.to_string_lossy())
            .replace("{out}", &output.to_string_lossy());
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn: {e}"))?;
        let start = Instant::now();
        let status = loop {
            match child.try_wait().map_err(|e| format!("wait: {e}"))? {
                Some(status) => break status,
                None if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("timed out after {:?}", self.timeout));
                }
                None => thread::sleep(Duration::from_millis(5)),
            }
        };
        if !status.success() {
            return Err(format!("command exited with {status}"));
        }
        let out = read_raster(&output).map_err(|e| format!("reading output: {e}"))?;
        if out.dim() != image.dim() {
            return Err(format!("output is {:?}, expected {:?}", out.dim(), image.dim()));
        }
        Ok(out)
    }
}

impl Denoiser for ExternalDenoiser {
    fn label(&self) -> String {
        "external".into()
    }

    fn denoise(&self, image: &Array2<f64>) -> std::result::Result<Array2<f64>, ModuleFault> {
        self.run(image).map_err(ModuleFault::Recoverable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_needs_placeholders() {
        assert!(ExternalDenoiser::new("cp a b").is_err());
        assert!(ExternalDenoiser::new("cp {in} {out}").is_ok());
    }

    #[test]
    fn copy_is_identity_up_to_quantization() {
        let d = ExternalDenoiser::new("cp {in} {out}").unwrap();
        let img = Array2::from_shape_fn((8, 8), |(i, j)| (i * 8 + j) as f64 / 64.0);
        let out = d.denoise(&img).unwrap();
        assert!((&out - &img).iter().all(|v| v.abs() <= 0.5 / 65535.0 + 1e-12));
    }

    #[test]
    fn failing_command_is_recoverable() {
        let d = ExternalDenoiser::new("exit 1; echo {in} {out}").unwrap();
        let img = Array2::zeros((4, 4));
        assert!(matches!(d.denoise(&img), Err(ModuleFault::Recoverable(_))));
    }

    #[test]
    fn timeout_is_recoverable() {
        let d = ExternalDenoiser::new("sleep 5; cp {in} {out}").unwrap().with_timeout(Duration::from_millis(100));
        let img = Array2::zeros((4, 4));
        assert!(matches!(d.denoise(&img), Err(ModuleFault::Recoverable(_))));
    }
}
