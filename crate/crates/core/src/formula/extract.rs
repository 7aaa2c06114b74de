//! Pull math blocks out of free-form solution text.

/// Contents of every `$$...$$` block and inline `$...$` span, in document
/// order. An unterminated delimiter ends the scan; escaped `\$` is text.
pub fn extract_formulas(solution: &str) -> Vec<String> {
    let bytes = solution.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'$' => {
                let display = bytes.get(i + 1) == Some(&b'$');
                let open = if display { 2 } else { 1 };
                let body_start = i + open;
                let Some(end) = find_close(bytes, body_start, display) else {
                    break;
                };
                let body = solution[body_start..end].trim();
                if !body.is_empty() {
                    out.push(body.to_string());
                }
                i = end + open;
            }
            _ => i += 1,
        }
    }
    out
}

fn find_close(bytes: &[u8], from: usize, display: bool) -> Option<usize> {
    let mut k = from;
    while k < bytes.len() {
        match bytes[k] {
            b'\\' => k += 2,
            b'$' if display => {
                if bytes.get(k + 1) == Some(&b'$') {
                    return Some(k);
                }
                k += 1;
            }
            b'$' => return Some(k),
            _ => k += 1,
        }
    }
    None
}

/// Strip one layer of `$$`/`$` delimiters from a rubric formula string.
pub fn strip_delimiters(s: &str) -> &str {
    let t = s.trim();
    for d in ["$$", "$"] {
        if let Some(inner) = t.strip_prefix(d).and_then(|r| r.strip_suffix(d)) {
            return inner.trim();
        }
    }
    t
}
