use super::{LogError, ParseWarning, RawLog, RegisterSchema, RunMetadata, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Any deviation from the block format is an error.
    Strict,
    /// Drop unterminated blocks, skip unparseable lines and carry missing
    /// registers forward from the previous snapshot, recording warnings.
    #[default]
    Lenient,
}

enum Line<'a> {
    Blank,
    Function(&'a str),
    Done,
    Register { name: &'a str, literal: &'a str },
    Other,
}

fn strip_timestamp(line: &str) -> &str {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix('[') {
        if let Some((stamp, tail)) = rest.split_once(']') {
            let stamp = stamp.trim();
            if !stamp.is_empty() && stamp.chars().all(|c| c.is_ascii_digit() || c == '.') {
                return tail.trim();
            }
        }
    }
    line
}

fn classify(raw: &str) -> Line<'_> {
    let line = strip_timestamp(raw);
    if line.is_empty() {
        return Line::Blank;
    }
    if line == "Done." {
        return Line::Done;
    }
    let Some((head, tail)) = line.split_once(':') else {
        return Line::Other;
    };
    let tail = tail.trim();
    if head == "function" {
        return if tail.is_empty() {
            Line::Other
        } else {
            Line::Function(tail)
        };
    }
    if head.is_empty() || head.contains(char::is_whitespace) {
        return Line::Other;
    }
    match tail.strip_prefix("0x").or_else(|| tail.strip_prefix("0X")) {
        Some(hex) if !hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit()) => {
            Line::Register {
                name: head,
                literal: tail,
            }
        }
        _ => Line::Other,
    }
}

fn parse_hex(literal: &str) -> Option<u32> {
    let digits = literal[2..].trim_start_matches('0');
    if digits.len() > 8 {
        return None;
    }
    if digits.is_empty() {
        return Some(0);
    }
    u32::from_str_radix(digits, 16).ok()
}

struct Block {
    function: String,
    line: usize,
    values: Vec<Option<u32>>,
}

struct Parser<'s> {
    schema: &'s RegisterSchema,
    mode: ParseMode,
    snapshots: Vec<Snapshot>,
    warnings: Vec<ParseWarning>,
    block: Option<Block>,
}

impl Parser<'_> {
    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.warnings.push(ParseWarning {
            line,
            message: message.into(),
        });
    }

    fn malformed(&mut self, line: usize, reason: impl Into<String>) -> Result<(), LogError> {
        let reason = reason.into();
        match self.mode {
            ParseMode::Strict => Err(LogError::MalformedLine { line, reason }),
            ParseMode::Lenient => {
                self.warn(line, format!("skipped: {reason}"));
                Ok(())
            }
        }
    }

    fn truncated(&mut self, line: usize) -> Result<(), LogError> {
        let Some(block) = self.block.take() else {
            return Ok(());
        };
        match self.mode {
            ParseMode::Strict => Err(LogError::TruncatedSnapshot {
                line,
                function: block.function,
            }),
            ParseMode::Lenient => {
                self.warn(
                    block.line,
                    format!("dropped unterminated block for `{}`", block.function),
                );
                Ok(())
            }
        }
    }

    fn finish_block(&mut self, line: usize) -> Result<(), LogError> {
        let block = self.block.take().expect("finish_block called inside a block");
        let missing: Vec<String> = block
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| self.schema.name(i).to_owned())
            .collect();

        let values: Vec<u32> = if missing.is_empty() {
            block.values.into_iter().map(Option::unwrap).collect()
        } else {
            match (self.mode, self.snapshots.last()) {
                (ParseMode::Strict, _) => {
                    return Err(LogError::MissingRegisters { line, missing });
                }
                (ParseMode::Lenient, None) => {
                    return Err(LogError::IncompleteFirstSnapshot { line, missing });
                }
                (ParseMode::Lenient, Some(prev)) => {
                    let carried = block
                        .values
                        .iter()
                        .zip(&prev.values)
                        .map(|(v, p)| v.unwrap_or(*p))
                        .collect();
                    self.warn(
                        block.line,
                        format!("carried forward missing registers {}", missing.join(", ")),
                    );
                    carried
                }
            }
        };

        let ordinal = self.snapshots.len();
        self.snapshots.push(Snapshot {
            function_name: block.function,
            values,
            ordinal,
        });
        Ok(())
    }

    fn feed(&mut self, line_no: usize, raw: &str) -> Result<(), LogError> {
        match classify(raw) {
            Line::Blank => Ok(()),
            Line::Function(name) => {
                if self.block.is_some() {
                    self.truncated(line_no)?;
                }
                self.block = Some(Block {
                    function: name.to_owned(),
                    line: line_no,
                    values: vec![None; self.schema.len()],
                });
                Ok(())
            }
            Line::Done => {
                if self.block.is_none() {
                    return self.malformed(line_no, "`Done.` outside a block");
                }
                self.finish_block(line_no)
            }
            Line::Register { name, literal } => {
                let Some(value) = parse_hex(literal) else {
                    return Err(LogError::ValueOverflow {
                        line: line_no,
                        register: name.to_owned(),
                        literal: literal.to_owned(),
                    });
                };
                if self.block.is_none() {
                    return self.malformed(line_no, format!("register {name} outside a block"));
                }
                let Some(idx) = self.schema.index_of(name) else {
                    return self.malformed(line_no, format!("unknown register {name}"));
                };
                let slot = &mut self.block.as_mut().unwrap().values[idx];
                let duplicate = slot.is_some();
                *slot = Some(value);
                if duplicate {
                    self.warn(line_no, format!("duplicate register {name}; last value kept"));
                }
                Ok(())
            }
            Line::Other => self.malformed(line_no, format!("unrecognized line {:?}", raw.trim())),
        }
    }
}

/// Parse log text into snapshots. Metadata is left at its default; attach
/// the sidecar with [`RawLog::with_metadata`].
pub fn parse_log(text: &str, schema: &RegisterSchema, mode: ParseMode) -> Result<RawLog, LogError> {
    let mut parser = Parser {
        schema,
        mode,
        snapshots: Vec::new(),
        warnings: Vec::new(),
        block: None,
    };
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        last_line = i + 1;
        parser.feed(last_line, raw)?;
    }
    parser.truncated(last_line + 1)?;
    Ok(RawLog {
        schema: schema.clone(),
        snapshots: parser.snapshots,
        metadata: RunMetadata::default(),
        warnings: parser.warnings,
    })
}
