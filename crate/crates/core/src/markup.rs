//! Scanner for the XML-like tagged sections used in prompts and agent output.
//!
//! This is not an XML parser. Tags are `<name attr="v">...</name>` with names
//! matching `[A-Za-z_][A-Za-z0-9_-]*`; anything else that starts with `<` is
//! plain text. Matching is by name only: a `</b>` inside `<a>...</a>` does not
//! close `<a>`, and nested elements with the same name are depth-counted.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkupError {
    #[error("tag <{tag}> opened at byte {offset} is never closed")]
    Unclosed { tag: String, offset: usize },
    #[error("closing tag </{tag}> at byte {offset} has no opening tag")]
    StrayClose { tag: String, offset: usize },
}

/// One element found in a text, borrowing its content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element<'a> {
    pub name: &'a str,
    pub attrs: Vec<(String, String)>,
    pub content: &'a str,
    /// Byte offset of the opening `<`.
    pub start: usize,
    /// Byte offset one past the closing `>`.
    pub end: usize,
}

impl Element<'_> {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug)]
enum Tag<'a> {
    Open {
        name: &'a str,
        attrs: Vec<(String, String)>,
        self_closing: bool,
        end: usize,
    },
    Close {
        name: &'a str,
        end: usize,
    },
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

fn read_name(bytes: &[u8], start: usize) -> Option<usize> {
    if start >= bytes.len() || !is_name_start(bytes[start]) {
        return None;
    }
    let mut i = start + 1;
    while i < bytes.len() && is_name_char(bytes[i]) {
        i += 1;
    }
    Some(i)
}

/// Parses a tag starting at `pos` (which must hold `<`).
fn parse_tag(text: &str, pos: usize) -> Option<Tag<'_>> {
    let bytes = text.as_bytes();
    debug_assert_eq!(bytes.get(pos), Some(&b'<'));
    let mut i = pos + 1;
    if bytes.get(i) == Some(&b'/') {
        i += 1;
        let name_end = read_name(bytes, i)?;
        let name = &text[i..name_end];
        let j = skip_ws(bytes, name_end);
        return (bytes.get(j) == Some(&b'>')).then_some(Tag::Close { name, end: j + 1 });
    }
    let name_end = read_name(bytes, i)?;
    let name = &text[i..name_end];
    i = name_end;
    let mut attrs = Vec::new();
    loop {
        let j = skip_ws(bytes, i);
        match bytes.get(j) {
            Some(b'>') => {
                return Some(Tag::Open {
                    name,
                    attrs,
                    self_closing: false,
                    end: j + 1,
                })
            }
            Some(b'/') if bytes.get(j + 1) == Some(&b'>') => {
                return Some(Tag::Open {
                    name,
                    attrs,
                    self_closing: true,
                    end: j + 2,
                })
            }
            _ => {}
        }
        // attributes need separating whitespace
        if j == i {
            return None;
        }
        let key_end = read_name(bytes, j)?;
        let key = text[j..key_end].to_string();
        let k = skip_ws(bytes, key_end);
        if bytes.get(k) != Some(&b'=') {
            return None;
        }
        let v = skip_ws(bytes, k + 1);
        let (value, next) = match bytes.get(v) {
            Some(&q @ (b'"' | b'\'')) => {
                let close = text[v + 1..].find(q as char)? + v + 1;
                if text[v + 1..close].contains(['<', '>']) {
                    return None;
                }
                (text[v + 1..close].to_string(), close + 1)
            }
            Some(_) => {
                let mut e = v;
                while e < bytes.len()
                    && !bytes[e].is_ascii_whitespace()
                    && bytes[e] != b'>'
                    && bytes[e] != b'<'
                    && bytes[e] != b'/'
                {
                    e += 1;
                }
                if e == v {
                    return None;
                }
                (text[v..e].to_string(), e)
            }
            None => return None,
        };
        attrs.push((key, value));
        i = next;
    }
}

/// Finds the close tag matching an element named `name` whose body starts at
/// `from`. Returns (content_end, element_end).
fn find_close(text: &str, name: &str, from: usize) -> Option<(usize, usize)> {
    let mut depth = 1usize;
    let mut search = from;
    while let Some(rel) = text[search..].find('<') {
        let at = search + rel;
        match parse_tag(text, at) {
            Some(Tag::Open {
                name: n,
                self_closing: false,
                end,
                ..
            }) if n == name => {
                depth += 1;
                search = end;
            }
            Some(Tag::Close { name: n, end }) if n == name => {
                depth -= 1;
                if depth == 0 {
                    return Some((at, end));
                }
                search = end;
            }
            Some(Tag::Open { end, .. }) | Some(Tag::Close { end, .. }) => search = end,
            None => search = at + 1,
        }
    }
    None
}

/// Returns every top-level element in order of appearance. Nested markup is
/// kept verbatim inside the parent's content. Text between elements is
/// ignored, but a top-level open tag without a close (or a stray close tag)
/// is an error.
pub fn top_level(text: &str) -> Result<Vec<Element<'_>>, MarkupError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = text[pos..].find('<') {
        let at = pos + rel;
        match parse_tag(text, at) {
            Some(Tag::Open {
                name,
                attrs,
                self_closing,
                end,
            }) => {
                if self_closing {
                    out.push(Element {
                        name,
                        attrs,
                        content: "",
                        start: at,
                        end,
                    });
                    pos = end;
                    continue;
                }
                let (content_end, elem_end) =
                    find_close(text, name, end).ok_or_else(|| MarkupError::Unclosed {
                        tag: name.to_string(),
                        offset: at,
                    })?;
                out.push(Element {
                    name,
                    attrs,
                    content: &text[end..content_end],
                    start: at,
                    end: elem_end,
                });
                pos = elem_end;
            }
            Some(Tag::Close { name, .. }) => {
                return Err(MarkupError::StrayClose {
                    tag: name.to_string(),
                    offset: at,
                })
            }
            None => pos = at + 1,
        }
    }
    Ok(out)
}

/// Finds every element named `name` (case-insensitive), non-overlapping and
/// in order, ignoring all other markup. An opened-but-unclosed element is an
/// error.
pub fn find_all<'a>(text: &'a str, name: &str) -> Result<Vec<Element<'a>>, MarkupError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = text[pos..].find('<') {
        let at = pos + rel;
        match parse_tag(text, at) {
            Some(Tag::Open {
                name: n,
                attrs,
                self_closing,
                end,
            }) if n.eq_ignore_ascii_case(name) => {
                if self_closing {
                    out.push(Element {
                        name: n,
                        attrs,
                        content: "",
                        start: at,
                        end,
                    });
                    pos = end;
                    continue;
                }
                let (content_end, elem_end) =
                    find_close(text, n, end).ok_or_else(|| MarkupError::Unclosed {
                        tag: n.to_string(),
                        offset: at,
                    })?;
                out.push(Element {
                    name: n,
                    attrs,
                    content: &text[end..content_end],
                    start: at,
                    end: elem_end,
                });
                pos = elem_end;
            }
            _ => pos = at + 1,
        }
    }
    Ok(out)
}

/// First element named `name`, if any.
pub fn find_first<'a>(text: &'a str, name: &str) -> Result<Option<Element<'a>>, MarkupError> {
    let mut pos = 0;
    while let Some(rel) = text[pos..].find('<') {
        let at = pos + rel;
        if let Some(Tag::Open {
            name: n,
            attrs,
            self_closing,
            end,
        }) = parse_tag(text, at)
        {
            if n.eq_ignore_ascii_case(name) {
                if self_closing {
                    return Ok(Some(Element {
                        name: n,
                        attrs,
                        content: "",
                        start: at,
                        end,
                    }));
                }
                let (content_end, elem_end) =
                    find_close(text, n, end).ok_or_else(|| MarkupError::Unclosed {
                        tag: n.to_string(),
                        offset: at,
                    })?;
                return Ok(Some(Element {
                    name: n,
                    attrs,
                    content: &text[end..content_end],
                    start: at,
                    end: elem_end,
                }));
            }
        }
        pos = at + 1;
    }
    Ok(None)
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_elements() {
        let els = top_level("<stacktrace>S</stacktrace>\n<root_cause>R</root_cause>").unwrap();
        let pairs: Vec<_> = els.iter().map(|e| (e.name, e.content)).collect();
        assert_eq!(pairs, vec![("stacktrace", "S"), ("root_cause", "R")]);
    }

    #[test]
    fn nested_kept_verbatim() {
        let els = top_level("<a><b>x</b></a>").unwrap();
        assert_eq!(els.len(), 1);
        assert_eq!(els[0].content, "<b>x</b>");
    }

    #[test]
    fn same_name_nesting_is_depth_counted() {
        let els = top_level("<a>1<a>2</a>3</a>").unwrap();
        assert_eq!(els[0].content, "1<a>2</a>3");
    }

    #[test]
    fn comparisons_are_not_tags() {
        let els = top_level("if a < b && c <= d { x->y }").unwrap();
        assert!(els.is_empty());
        // include-style angle brackets inside an element stay content
        let els = top_level("<code>#include <stdio.h></code>").unwrap();
        assert_eq!(els[0].content, "#include <stdio.h>");
    }

    #[test]
    fn unclosed_and_stray() {
        assert!(matches!(
            top_level("<a>never"),
            Err(MarkupError::Unclosed { .. })
        ));
        assert!(matches!(
            top_level("text </a>"),
            Err(MarkupError::StrayClose { .. })
        ));
    }

    #[test]
    fn attributes() {
        let el = find_first(r#"x <constraint category="SetupTeardown" id=3>body</constraint>"#, "constraint")
            .unwrap()
            .unwrap();
        assert_eq!(el.attr("category"), Some("SetupTeardown"));
        assert_eq!(el.attr("id"), Some("3"));
        assert_eq!(el.content, "body");
    }

    #[test]
    fn find_all_skips_other_markup() {
        let t = "<c>1</c> junk <x> <c>2</c>";
        let all = find_all(t, "c").unwrap();
        assert_eq!(all.iter().map(|e| e.content).collect::<Vec<_>>(), vec!["1", "2"]);
    }

    #[test]
    fn normalize() {
        assert_eq!(normalize_ws("  a \n\t b  "), "a b");
    }
}
