//! Tolerant HTML main-content extraction.
//!
//! A single-pass tokenizer over possibly malformed markup. Content inside
//! `script`, `style`, `nav`, `header`, `footer`, `aside`, comments, and
//! attributes never reaches the output (`title` is treated the same way —
//! it is document metadata, not visible content). The survivors are grouped
//! into blocks at block-element boundaries; blocks whose text-to-markup
//! ratio falls below [`MIN_TEXT_MARKUP_RATIO`] are discarded as boilerplate
//! (link farms, button rows).
//!
//! Whitespace runs inside a block collapse to one space, or to one newline
//! when the run crosses a line break; that keeps extraction idempotent on
//! its own output.

/// Keep a block when `text_chars ≥ ratio × markup_chars`.
pub const MIN_TEXT_MARKUP_RATIO: f64 = 0.25;

/// Elements whose entire content is dropped.
const DROPPED: &[&str] = &["script", "style", "nav", "header", "footer", "aside", "title"];

/// Elements whose content is raw text (no nested tags) per the HTML spec.
const RAW_TEXT: &[&str] = &["script", "style"];

const BLOCK: &[&str] = &[
    "address", "article", "blockquote", "body", "br", "center", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "form", "h1", "h2", "h3", "h4", "h5", "h6", "head",
    "hr", "html", "li", "main", "ol", "p", "pre", "section", "table", "tbody", "td", "tfoot",
    "th", "thead", "tr", "ul",
];

struct BlockAccumulator {
    raw: String,
    markup_chars: usize,
    blocks: Vec<String>,
}

impl BlockAccumulator {
    fn new() -> Self {
        BlockAccumulator {
            raw: String::new(),
            markup_chars: 0,
            blocks: Vec::new(),
        }
    }

    fn push_char(&mut self, c: char) {
        self.raw.push(c);
    }

    fn add_markup(&mut self, chars: usize) {
        self.markup_chars += chars;
    }

    fn boundary(&mut self) {
        let text = collapse_whitespace(&self.raw);
        if !text.is_empty() {
            let keep = self.markup_chars == 0
                || text.chars().count() as f64
                    >= MIN_TEXT_MARKUP_RATIO * self.markup_chars as f64;
            if keep {
                self.blocks.push(text);
            }
        }
        self.raw.clear();
        self.markup_chars = 0;
    }

    fn finish(mut self) -> String {
        self.boundary();
        self.blocks.join("\n")
    }
}

/// Collapse whitespace runs; a run containing a line break becomes a single
/// newline, any other run a single space. Leading/trailing runs are trimmed.
fn collapse_whitespace(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending: Option<char> = None;
    for c in raw.chars() {
        if c.is_whitespace() {
            if !out.is_empty() {
                pending = match (pending, c) {
                    (Some('\n'), _) | (_, '\n') => Some('\n'),
                    _ => Some(' '),
                };
            }
        } else {
            if let Some(sep) = pending.take() {
                out.push(sep);
            }
            out.push(c);
        }
    }
    out
}

fn decode_entity(chars: &[char], at: usize) -> Option<(usize, Option<char>)> {
    // chars[at] == '&'; returns (consumed, decoded) on a recognized entity.
    let end = (at + 12).min(chars.len());
    let semi = (at + 1..end).find(|&i| chars[i] == ';')?;
    let body: String = chars[at + 1..semi].iter().collect();
    let decoded = if let Some(num) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
        u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
    } else if let Some(num) = body.strip_prefix('#') {
        num.parse::<u32>().ok().and_then(char::from_u32)
    } else {
        match body.as_str() {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ => return None,
        }
    };
    Some((semi + 1 - at, decoded))
}

fn starts_tag(chars: &[char], at: usize) -> bool {
    match chars.get(at + 1) {
        Some(c) => c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'),
        None => false,
    }
}

/// Consume a tag starting at `<`; returns (consumed_len, name, is_closing).
/// Quoted attribute values may contain `>`. On EOF inside the tag the rest
/// of the input is consumed.
fn read_tag(chars: &[char], at: usize) -> (usize, String, bool) {
    let mut i = at + 1;
    let closing = chars.get(i) == Some(&'/');
    if closing {
        i += 1;
    }
    let mut name = String::new();
    while let Some(&c) = chars.get(i) {
        if c.is_ascii_alphanumeric() {
            name.push(c.to_ascii_lowercase());
            i += 1;
        } else {
            break;
        }
    }
    let mut quote: Option<char> = None;
    while let Some(&c) = chars.get(i) {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '"' | '\'' => quote = Some(c),
                '>' => {
                    i += 1;
                    return (i - at, name, closing);
                }
                _ => {}
            },
        }
        i += 1;
    }
    (i - at, name, closing)
}

/// Case-insensitive search for `</name` at or after `from`; returns the index
/// one past the closing `>` (or EOF).
fn skip_raw_text(chars: &[char], from: usize, name: &str) -> usize {
    let needle: Vec<char> = format!("</{name}").chars().collect();
    let mut i = from;
    'outer: while i + needle.len() <= chars.len() {
        for (off, nc) in needle.iter().enumerate() {
            if !chars[i + off].eq_ignore_ascii_case(nc) {
                i += 1;
                continue 'outer;
            }
        }
        // Found the closing tag; consume through its '>'.
        let mut j = i + needle.len();
        while j < chars.len() && chars[j] != '>' {
            j += 1;
        }
        return (j + 1).min(chars.len());
    }
    chars.len()
}

/// Extract visible main-content text from an HTML string.
pub fn extract(html: &str) -> String {
    let chars: Vec<char> = html.chars().collect();
    let mut acc = BlockAccumulator::new();
    let mut drop_depth = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let c = chars[i];
        if c == '<' && starts_tag(&chars, i) {
            if chars.get(i + 1) == Some(&'!') {
                if chars[i..].starts_with(&['<', '!', '-', '-']) {
                    // Comment: skip to matching --> (or EOF).
                    let mut j = i + 4;
                    while j + 2 < chars.len()
                        && !(chars[j] == '-' && chars[j + 1] == '-' && chars[j + 2] == '>')
                    {
                        j += 1;
                    }
                    i = if j + 2 < chars.len() { j + 3 } else { chars.len() };
                } else {
                    // DOCTYPE and friends: skip to '>'.
                    while i < chars.len() && chars[i] != '>' {
                        i += 1;
                    }
                    i = (i + 1).min(chars.len());
                }
                continue;
            }
            if chars.get(i + 1) == Some(&'?') {
                while i < chars.len() && chars[i] != '>' {
                    i += 1;
                }
                i = (i + 1).min(chars.len());
                continue;
            }
            let (len, name, closing) = read_tag(&chars, i);
            i += len;
            let dropped = DROPPED.contains(&name.as_str());
            let block = BLOCK.contains(&name.as_str()) || dropped;
            if block {
                acc.boundary();
            }
            if dropped {
                if closing {
                    drop_depth = drop_depth.saturating_sub(1);
                } else if RAW_TEXT.contains(&name.as_str()) {
                    i = skip_raw_text(&chars, i, &name);
                } else {
                    drop_depth += 1;
                }
            } else if !block && drop_depth == 0 {
                acc.add_markup(len);
            }
            continue;
        }
        if c == '&' && drop_depth == 0 {
            if let Some((consumed, decoded)) = decode_entity(&chars, i) {
                if let Some(d) = decoded {
                    acc.push_char(d);
                }
                i += consumed;
                continue;
            }
        }
        if drop_depth == 0 {
            acc.push_char(c);
        }
        i += 1;
    }
    acc.finish()
}
