//! Line-delimited JSON records: one object per line, blank lines ignored.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Decode {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Encode(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn read_records<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| JsonlError::Decode { line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_records<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    read_records(text.as_bytes())
}

pub fn write_records<'a, T, W, I>(mut writer: W, records: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_string<'a, T, I>(records: I) -> Result<String, JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
