//! Chain dumps: one CSV row per iteration with columns `iteration`,
//! `accept`, `step`, `log_posterior` and one column per flattened
//! parameter. Values are written at full precision so a dump reads back to
//! the identical chain.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mala::PosteriorChain;

const FIXED: [&str; 4] = ["iteration", "accept", "step", "log_posterior"];

pub fn write_chain<W: std::io::Write>(chain: &PosteriorChain, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = FIXED.to_vec();
    header.extend(chain.names.iter().map(String::as_str));
    w.write_record(&header)?;
    for i in 0..chain.iterations() {
        let mut row = vec![
            i.to_string(),
            u8::from(chain.accept_flags[i]).to_string(),
            chain.step_sizes[i].to_string(),
            chain.log_posteriors[i].to_string(),
        ];
        row.extend(chain.draws[i].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("writing chain dump: {e}")))?;
    Ok(())
}

pub fn write_chain_csv(chain: &PosteriorChain, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_chain(chain, std::io::BufWriter::new(file))
}

pub fn read_chain<R: std::io::Read>(input: R) -> Result<PosteriorChain> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() <= FIXED.len() || header[..FIXED.len()] != FIXED {
        return Err(Error::Schema(format!(
            "chain dump header must start with {} followed by parameter names",
            FIXED.join(",")
        )));
    }
    let mut chain = PosteriorChain {
        names: header[FIXED.len()..].to_vec(),
        draws: Vec::new(),
        accept_flags: Vec::new(),
        step_sizes: Vec::new(),
        log_posteriors: Vec::new(),
    };
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |j: usize| -> Result<f64> {
            row.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Schema(format!("chain dump row {}: bad value in column {}", line + 1, header[j])))
        };
        if row.len() != header.len() {
            return Err(Error::Schema(format!("chain dump row {} has {} fields", line + 1, row.len())));
        }
        if num(0)? as usize != line {
            return Err(Error::Schema(format!("chain dump row {}: iterations out of order", line + 1)));
        }
        chain.accept_flags.push(num(1)? != 0.0);
        chain.step_sizes.push(num(2)?);
        chain.log_posteriors.push(num(3)?);
        chain.draws.push((FIXED.len()..header.len()).map(num).collect::<Result<_>>()?);
    }
    if chain.draws.is_empty() {
        return Err(Error::Empty("chain dump has no iterations".into()));
    }
    Ok(chain)
}

pub fn read_chain_csv(path: &Path) -> Result<PosteriorChain> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_chain(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> PosteriorChain {
        PosteriorChain {
            names: vec!["gamma[(intercept)]".into(), "theta_tilde".into()],
            draws: vec![vec![0.1, -1.0 / 3.0], vec![1e-300, 2.5e17]],
            accept_flags: vec![true, false],
            step_sizes: vec![0.05, std::f64::consts::PI],
            log_posteriors: vec![-1234.5678901234567, -1234.0],
        }
    }

    #[test]
    fn exact_round_trip() {
        let mut buf = Vec::new();
        write_chain(&chain(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,accept,step,log_posterior,gamma[(intercept)],theta_tilde\n0,1,"));
        assert_eq!(read_chain(buf.as_slice()).unwrap(), chain());
    }

    #[test]
    fn malformed_dumps() {
        assert!(matches!(read_chain("a,b\n1,2\n".as_bytes()), Err(Error::Schema(_))));
        let empty = "iteration,accept,step,log_posterior,x\n";
        assert!(matches!(read_chain(empty.as_bytes()), Err(Error::Empty(_))));
        let bad = "iteration,accept,step,log_posterior,x\n0,1,0.1,-3,abc\n";
        assert!(matches!(read_chain(bad.as_bytes()), Err(Error::Schema(_))));
    }
}
