//! Rule-based passage segmentation and the `<p>`/`<s>` markup format.
//!
//! Segmentation never fails and never drops text: bad rules only move
//! passage boundaries.

use thiserror::Error;

use crate::corpus::{Document, Lang, PassageKind};
use crate::length_metric::{classify_char, Width};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationRules {
    /// Break after these when followed by whitespace or end of paragraph.
    pub english_terminators: Vec<char>,
    /// Break immediately after these.
    pub chinese_terminators: Vec<char>,
    /// Closing quotes and brackets that stay with the preceding terminator.
    pub closers: Vec<char>,
    /// Tokens ending in `.` that never end a sentence.
    pub abbreviations: Vec<String>,
    /// Treat tokens like `J.` or `C.B.E.` (single letters and dots) as
    /// non-terminal.
    pub initials_guard: bool,
    /// A line starting with this mark begins a new paragraph.
    pub paragraph_mark: Option<char>,
    /// A line ending in a colon closes the passage it ends.
    pub colon_line_break: bool,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        SegmentationRules {
            english_terminators: vec!['.', '!', '?'],
            chinese_terminators: vec!['。', '！', '？', '；'],
            closers: vec!['"', '\'', ')', ']', '’', '”', '」', '』', '）'],
            abbreviations: ["Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "St.", "No.", "Hon.", "e.g.", "i.e.", "cf.", "vs.", "etc."]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            initials_guard: true,
            paragraph_mark: Some('¶'),
            colon_line_break: true,
        }
    }
}

impl SegmentationRules {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.english_terminators.is_empty() {
            return Err(SegmentError::NoTerminators(Lang::English));
        }
        if self.chinese_terminators.is_empty() {
            return Err(SegmentError::NoTerminators(Lang::Chinese));
        }
        Ok(())
    }

    fn terminators(&self, lang: Lang) -> &[char] {
        match lang {
            Lang::English => &self.english_terminators,
            Lang::Chinese => &self.chinese_terminators,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("no sentence terminators configured for {0}")]
    NoTerminators(Lang),
}

/// Splits decoded text into paragraphs and passages.
pub fn segment(raw: &str, lang: Lang, rules: &SegmentationRules) -> Document {
    let mut passages: Vec<(String, PassageKind)> = Vec::new();
    let mut breaks = Vec::new();
    for para in paragraphs(raw, rules) {
        let start = passages.len();
        let mut buf = String::new();
        for line in &para {
            let body = strip_mark(line, rules);
            if is_list_item(body) {
                flush(&mut buf, lang, rules, PassageKind::Sentence, &mut passages);
                passages.push((line.to_string(), PassageKind::ListItem));
            } else if lang == Lang::English && is_caps_heading(body, rules) {
                flush(&mut buf, lang, rules, PassageKind::Sentence, &mut passages);
                passages.push((line.to_string(), PassageKind::Heading));
            } else {
                join_line(&mut buf, line, lang);
                if rules.colon_line_break && (line.ends_with(':') || line.ends_with('：')) {
                    flush(&mut buf, lang, rules, PassageKind::Other, &mut passages);
                }
            }
        }
        let tail_kind = if para.len() == 1 { PassageKind::Heading } else { PassageKind::Sentence };
        flush(&mut buf, lang, rules, tail_kind, &mut passages);
        if passages.len() > start {
            breaks.push(start);
        }
    }
    Document::new(lang, passages, breaks).expect("segmented passages are non-empty")
}

/// Lines of each paragraph, whitespace-collapsed and trimmed.
fn paragraphs(raw: &str, rules: &SegmentationRules) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for line in raw.lines() {
        let line = collapse(line);
        if line.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        if rules.paragraph_mark.is_some_and(|m| line.starts_with(m)) && !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
        current.push(line);
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_mark<'a>(line: &'a str, rules: &SegmentationRules) -> &'a str {
    match rules.paragraph_mark {
        Some(m) => line.strip_prefix(m).unwrap_or(line).trim_start(),
        None => line,
    }
}

fn is_wide(c: char) -> bool {
    classify_char(c) == Width::Wide
}

/// Appends a line, separated by a space unless both sides of the join are
/// wide Chinese characters.
fn join_line(buf: &mut String, line: &str, lang: Lang) {
    if let (Some(last), Some(first)) = (buf.chars().last(), line.chars().next()) {
        if !(lang == Lang::Chinese && is_wide(last) && is_wide(first)) {
            buf.push(' ');
        }
    }
    buf.push_str(line);
}

/// `- x`, `* x`, `• x`, `1. x`, `(a) x`, `iv) x`, `（一）x`, `一、x`.
fn is_list_item(body: &str) -> bool {
    if ["- ", "* ", "• ", "· "].iter().any(|m| body.starts_with(m)) {
        return true;
    }
    let chars: Vec<char> = body.chars().collect();
    let marker_char = |c: char| c.is_ascii_digit() || c.is_ascii_lowercase();
    let cjk_numeral = |c: char| "一二三四五六七八九十".contains(c);
    let spaced = |k: usize| chars.get(k).is_none_or(|c| c.is_whitespace());
    // (x) or （x）
    if let Some(&open) = chars.first() {
        let close = match open {
            '(' => Some(')'),
            '（' => Some('）'),
            _ => None,
        };
        if let Some(close) = close {
            if let Some(end) = chars.iter().take(5).position(|&c| c == close) {
                let inner = &chars[1..end];
                if !inner.is_empty()
                    && (inner.iter().all(|&c| marker_char(c)) || inner.iter().all(|&c| cjk_numeral(c)))
                {
                    return open == '（' || spaced(end + 1);
                }
            }
            return false;
        }
    }
    let run = chars.iter().take_while(|&&c| marker_char(c)).count();
    if (1..=3).contains(&run) && matches!(chars.get(run), Some('.') | Some(')')) && spaced(run + 1) && chars.len() > run + 2 {
        // A lone letter before a period is an initial, not a marker.
        let digits = chars[..run].iter().all(char::is_ascii_digit);
        let roman = chars[..run].iter().all(|c| "ivx".contains(*c));
        return digits || roman || chars[run] == ')';
    }
    let run = chars.iter().take_while(|&&c| cjk_numeral(c)).count();
    (1..=3).contains(&run) && chars.get(run) == Some(&'、')
}

/// An English line with letters, no lowercase, and no sentence-ending
/// punctuation.
fn is_caps_heading(body: &str, rules: &SegmentationRules) -> bool {
    let last = match body.chars().last() {
        Some(c) => c,
        None => return false,
    };
    body.chars().any(char::is_alphabetic)
        && !body.chars().any(char::is_lowercase)
        && !rules.english_terminators.contains(&last)
        && last != ':'
}

/// Splits `buf` into passages. A trailing fragment with no terminator gets
/// `tail_kind`.
fn flush(buf: &mut String, lang: Lang, rules: &SegmentationRules, tail_kind: PassageKind, out: &mut Vec<(String, PassageKind)>) {
    let text = std::mem::take(buf);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let terms = rules.terminators(lang);
    let mut start = 0;
    let mut k = 0;
    while k < chars.len() {
        let (_, c) = chars[k];
        if !terms.contains(&c) {
            k += 1;
            continue;
        }
        let mut end = k + 1;
        while end < chars.len() && rules.closers.contains(&chars[end].1) {
            end += 1;
        }
        let boundary = match lang {
            Lang::Chinese => true,
            Lang::English => {
                (end == chars.len() || chars[end].1.is_whitespace())
                    && !(c == '.' && suppressed(&text, chars[start].0, chars[k].0, rules))
            }
        };
        if boundary {
            let byte_end = chars.get(end).map_or(text.len(), |&(b, _)| b);
            push_passage(&text[chars[start].0..byte_end], PassageKind::Sentence, out);
            start = end;
        }
        k = end;
    }
    if start < chars.len() {
        let kind = if start == 0 { tail_kind } else if tail_kind == PassageKind::Heading { PassageKind::Sentence } else { tail_kind };
        push_passage(&text[chars[start].0..], kind, out);
    }
}

fn push_passage(s: &str, kind: PassageKind, out: &mut Vec<(String, PassageKind)>) {
    let s = s.trim();
    if !s.is_empty() {
        out.push((s.to_string(), kind));
    }
}

/// Whether the period at byte `dot` is part of an abbreviation or initials.
fn suppressed(text: &str, from: usize, dot: usize, rules: &SegmentationRules) -> bool {
    let head = &text[from..dot + 1];
    let token = head.rsplit(char::is_whitespace).next().unwrap_or(head);
    let token = token.trim_start_matches(|c: char| "([\"'“‘".contains(c));
    if rules.abbreviations.iter().any(|a| a == token) {
        return true;
    }
    if rules.initials_guard {
        // Alternating single letters and dots: "J.", "J.P.", "K.B.E."
        let chars: Vec<char> = token.chars().collect();
        if !chars.is_empty()
            && chars.len() % 2 == 0
            && chars.chunks(2).all(|p| p[0].is_alphabetic() && p[1] == '.')
        {
            return true;
        }
    }
    false
}

/// `<p>` per paragraph, `<s>` per passage, paragraphs separated by newlines.
/// Non-sentence passages carry a `type` attribute.
pub fn emit_markup(doc: &Document) -> String {
    let mut out = String::new();
    for (k, para) in doc.paragraphs().into_iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        out.push_str("<p>");
        for p in &doc.passages()[para] {
            match p.kind() {
                PassageKind::Sentence => out.push_str("<s>"),
                kind => {
                    out.push_str("<s type=\"");
                    out.push_str(kind.name());
                    out.push_str("\">");
                }
            }
            escape_into(p.text(), &mut out);
            out.push_str("</s>");
        }
        out.push_str("</p>");
    }
    out
}

fn escape_into(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("markup {line}:{column}: {message}")]
pub struct MarkupError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn error(&self, at: usize, message: impl Into<String>) -> MarkupError {
        let before = &self.src[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        MarkupError { line, column, message: message.into() }
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    /// Reads a tag starting at the cursor and returns its inner text.
    fn tag(&mut self) -> Result<(usize, &'a str), MarkupError> {
        let at = self.pos;
        if !self.rest().starts_with('<') {
            return Err(self.error(at, "expected a tag"));
        }
        let close = self.rest().find('>').ok_or_else(|| self.error(at, "unterminated tag"))?;
        let src: &'a str = self.src;
        let inner = &src[at + 1..at + close];
        self.pos = at + close + 1;
        Ok((at, inner))
    }
}

/// Reads the markup written by [`emit_markup`].
pub fn parse_markup(marked: &str, lang: Lang) -> Result<Document, MarkupError> {
    let mut cur = Cursor { src: marked, pos: 0 };
    let mut passages: Vec<(String, PassageKind)> = Vec::new();
    let mut breaks = Vec::new();
    loop {
        cur.skip_ws();
        if cur.rest().is_empty() {
            break;
        }
        let (at, tag) = cur.tag()?;
        if tag != "p" {
            return Err(cur.error(at, format!("expected <p>, found <{tag}>")));
        }
        let para_start = passages.len();
        loop {
            cur.skip_ws();
            if cur.rest().is_empty() {
                return Err(cur.error(at, "unclosed <p>"));
            }
            let (at, tag) = cur.tag()?;
            if tag == "/p" {
                if passages.len() == para_start {
                    return Err(cur.error(at, "empty paragraph"));
                }
                break;
            }
            let kind = match tag {
                "s" => PassageKind::Sentence,
                _ => tag
                    .strip_prefix("s type=\"")
                    .and_then(|t| t.strip_suffix('"'))
                    .and_then(PassageKind::from_name)
                    .filter(|k| *k != PassageKind::Sentence)
                    .ok_or_else(|| cur.error(at, format!("unknown tag <{tag}>")))?,
            };
            let text_start = cur.pos;
            let end = cur.rest().find('<').ok_or_else(|| cur.error(at, "unclosed <s>"))?;
            let raw = &marked[text_start..text_start + end];
            cur.pos = text_start + end;
            let (close_at, close) = cur.tag()?;
            if close != "/s" {
                return Err(cur.error(close_at, format!("expected </s>, found <{close}>")));
            }
            let text = unescape(raw).map_err(|off| cur.error(text_start + off, "unknown entity"))?;
            if text.trim().is_empty() {
                return Err(cur.error(at, "empty sentence"));
            }
            passages.push((text, kind));
        }
        breaks.push(para_start);
    }
    Ok(Document::new(lang, passages, breaks).expect("parsed passages are non-empty"))
}

/// Decodes `&amp;`, `&lt;`, `&gt;`. On failure returns the byte offset of the
/// bad `&` or `>`.
fn unescape(raw: &str) -> Result<String, usize> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(k) = rest.find(['&', '>']) {
        let offset = raw.len() - rest.len() + k;
        out.push_str(&rest[..k]);
        let tail = &rest[k..];
        let (ch, len) = if tail.starts_with("&amp;") {
            ('&', 5)
        } else if tail.starts_with("&lt;") {
            ('<', 4)
        } else if tail.starts_with("&gt;") {
            ('>', 4)
        } else {
            return Err(offset);
        };
        out.push(ch);
        rest = &tail[len..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(doc: &Document) -> Vec<(&str, PassageKind)> {
        doc.passages().iter().map(|p| (p.text(), p.kind())).collect()
    }

    fn seg(raw: &str, lang: Lang) -> Document {
        segment(raw, lang, &SegmentationRules::default())
    }

    #[test]
    fn simple_english() {
        let d = seg("Hello. World.", Lang::English);
        assert_eq!(texts(&d), vec![("Hello.", PassageKind::Sentence), ("World.", PassageKind::Sentence)]);
    }

    #[test]
    fn single_chinese_sentence() {
        let d = seg("希望總督先生認真回應這問題。", Lang::Chinese);
        assert_eq!(texts(&d), vec![("希望總督先生認真回應這問題。", PassageKind::Sentence)]);
    }

    #[test]
    fn caps_header_line() {
        let d = seg("THE HONOURABLE MAN SAI - CHEONG\n\nHe asked a question. It was long.", Lang::English);
        assert_eq!(d.passages()[0].kind(), PassageKind::Heading);
        assert_eq!(d.passages()[0].text(), "THE HONOURABLE MAN SAI - CHEONG");
        assert_eq!(d.len(), 3);
        assert_eq!(d.paragraphs(), vec![0..1, 1..3]);
    }

    #[test]
    fn speaker_turn_and_paragraph_marks() {
        let raw = "¶MR FRED LI (in Cantonese):\nMr President, I move the motion. It stands in my name.\n¶THE CHIEF SECRETARY: Yes.";
        let d = seg(raw, Lang::English);
        assert_eq!(
            texts(&d),
            vec![
                ("¶MR FRED LI (in Cantonese):", PassageKind::Other),
                ("Mr President, I move the motion.", PassageKind::Sentence),
                ("It stands in my name.", PassageKind::Sentence),
                ("¶THE CHIEF SECRETARY: Yes.", PassageKind::Sentence),
            ]
        );
        assert_eq!(d.paragraphs(), vec![0..3, 3..4]);
    }

    #[test]
    fn abbreviations_initials_and_decimals() {
        let d = seg("Dr. Wong met J.P. Lee at 3.5 p.m. today. Then he left!", Lang::English);
        assert_eq!(d.len(), 2, "{:?}", texts(&d));
        let d = seg("He said \"Stop.\" Then silence.", Lang::English);
        assert_eq!(texts(&d)[0].0, "He said \"Stop.\"");
    }

    #[test]
    fn chinese_terminators_and_line_joining() {
        let d = seg("第一句。第二\n句！第三句；\n尾巴", Lang::Chinese);
        assert_eq!(
            texts(&d),
            vec![
                ("第一句。", PassageKind::Sentence),
                ("第二句！", PassageKind::Sentence),
                ("第三句；", PassageKind::Sentence),
                ("尾巴", PassageKind::Sentence),
            ]
        );
    }

    #[test]
    fn list_items() {
        let d = seg("Items follow:\n(a) the first thing\n(b) the second thing\n1. numbered", Lang::English);
        let kinds: Vec<_> = d.passages().iter().map(|p| p.kind()).collect();
        assert_eq!(kinds, vec![PassageKind::Other, PassageKind::ListItem, PassageKind::ListItem, PassageKind::ListItem]);
        assert!(is_list_item("（一）第一項"));
        assert!(is_list_item("二、第二項"));
        assert!(!is_list_item("A. Smith spoke."));
        assert!(!is_list_item("(in Cantonese):"));
    }

    #[test]
    fn markup_examples() {
        assert_eq!(emit_markup(&Document::empty(Lang::English)), "");
        let d = Document::from_sentences(Lang::English, ["One.", "Two < 3 & 4."]).unwrap();
        let m = emit_markup(&d);
        assert_eq!(m, "<p><s>One.</s><s>Two &lt; 3 &amp; 4.</s></p>");
        assert_eq!(parse_markup(&m, Lang::English).unwrap(), d);
        let d = seg("HEADER\n\nBody one. Body two.", Lang::English);
        let m = emit_markup(&d);
        assert_eq!(m, "<p><s type=\"heading\">HEADER</s></p>\n<p><s>Body one.</s><s>Body two.</s></p>");
        assert_eq!(parse_markup(&m, Lang::English).unwrap(), d);
    }

    #[test]
    fn markup_errors_have_positions() {
        let e = parse_markup("<p><s>a</s>\n<q>b</q></p>", Lang::English).unwrap_err();
        assert_eq!((e.line, e.column), (2, 1));
        assert!(parse_markup("<p><s>a</s>", Lang::English).is_err());
        assert!(parse_markup("<p><s>a</p>", Lang::English).is_err());
        assert!(parse_markup("stray<p><s>a</s></p>", Lang::English).is_err());
        assert!(parse_markup("<p></p>", Lang::English).is_err());
        assert!(parse_markup("<p><s> </s></p>", Lang::English).is_err());
        assert!(parse_markup("<p><s>a &quot;</s></p>", Lang::English).is_err());
        assert!(parse_markup("<p><s type=\"x\">a</s></p>", Lang::English).is_err());
    }

    #[test]
    fn empty_rules_are_rejected() {
        let rules = SegmentationRules { chinese_terminators: vec![], ..Default::default() };
        assert_eq!(rules.validate(), Err(SegmentError::NoTerminators(Lang::Chinese)));
        assert!(SegmentationRules::default().validate().is_ok());
    }

    fn squeeze(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    fn arb_text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                "[A-Za-z]{1,8}",
                Just(". ".to_string()),
                Just("! ".to_string()),
                Just("\n".to_string()),
                Just("\n\n".to_string()),
                Just("¶".to_string()),
                Just("J.P. ".to_string()),
                Just("中文".to_string()),
                Just("。".to_string()),
                Just("；".to_string()),
                Just(":\n".to_string()),
                Just("(a) ".to_string()),
                Just(" ".to_string()),
            ],
            0..40,
        )
        .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn no_text_is_lost(raw in arb_text(), zh in any::<bool>()) {
            let lang = if zh { Lang::Chinese } else { Lang::English };
            let d = seg(&raw, lang);
            let joined: String = d.passages().iter().map(|p| p.text()).collect();
            prop_assert_eq!(squeeze(&joined), squeeze(&raw));
        }

        #[test]
        fn markup_round_trip(raw in arb_text(), zh in any::<bool>()) {
            let lang = if zh { Lang::Chinese } else { Lang::English };
            let d = seg(&raw, lang);
            let m = emit_markup(&d);
            let back = parse_markup(&m, lang).unwrap();
            prop_assert_eq!(&back, &d);
            prop_assert_eq!(emit_markup(&back), m);
        }

        #[test]
        fn single_sentence_is_stable(words in prop::collection::vec("[a-z]{1,8}", 1..10)) {
            let s = format!("{}.", words.join(" "));
            let d = seg(&s, Lang::English);
            prop_assert_eq!(d.len(), 1);
            let again = seg(d.passages()[0].text(), Lang::English);
            prop_assert_eq!(again.passages()[0].text(), s.as_str());
        }
    }
}
