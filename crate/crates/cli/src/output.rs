use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits in scientific notation; `inf`, `-inf`, `nan`
/// spelled out.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// JSON formatter writing every float with 17 significant digits.
struct Sci17;

impl Formatter for Sci17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// One compact JSON document on a single line. Non-finite floats become
/// `null`.
pub fn json_line<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci17);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Destination of a command's main output.
pub struct Sink {
    inner: Box<dyn Write>,
    path: Option<String>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Sink, CliError> {
        match path {
            Some(p) => {
                let f = File::create(p).map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?;
                Ok(Sink { inner: Box::new(BufWriter::new(f)), path: Some(p.display().to_string()) })
            }
            None => Ok(Sink { inner: Box::new(BufWriter::new(io::stdout().lock())), path: None }),
        }
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        self.inner.write_all(text.as_bytes()).and_then(|_| self.inner.write_all(b"\n")).map_err(|e| self.io(e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| self.io(e))
    }

    fn io(&self, e: io::Error) -> CliError {
        CliError::Io(format!("{}: {e}", self.path.as_deref().unwrap_or("stdout")))
    }
}

/// Record that opens every JSON lines file.
#[derive(Serialize)]
pub struct Header<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub params: &'a P,
}

impl<'a, P: Serialize> Header<'a, P> {
    pub fn new(command: &'a str, params: &'a P) -> Self {
        Header { tool: "solitons", version: VERSION, command, params }
    }

    /// `#`-prefixed comment lines for CSV output.
    pub fn comment(&self) -> String {
        format!("# {} {} {}\n# params {}", self.tool, self.version, self.command, json_line(self.params))
    }
}

/// CSV rows from pre-formatted fields.
pub fn csv_record(fields: &[String]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).map_err(|e| CliError::Io(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    let mut s = String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8");
    s.pop();
    Ok(s)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut sink = Sink::open(Some(path))?;
    sink.line(&json_line(value))?;
    sink.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(f64::INFINITY), "inf");
        assert_eq!(json_line(&[1.0, f64::NAN]), "[1.0000000000000000e0,null]");
        let back: f64 = fmt17(1.0 / 3.0).parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
