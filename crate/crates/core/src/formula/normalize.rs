//! Source-level cleanup of presentation-only LaTeX.

const DROP_COMMANDS: &[&str] = &[
    "left", "right", "bigl", "bigr", "Bigl", "Bigr", "biggl", "biggr", "Biggl", "Biggr", "big", "Big", "bigg", "Bigg",
];

const STYLE_COMMANDS: &[&str] = &[
    "mathrm",
    "mathit",
    "mathbf",
    "text",
    "textrm",
    "textit",
    "textbf",
    "mathsf",
    "boldsymbol",
    "bm",
    "displaystyle",
    "textstyle",
];

const SPACE_COMMANDS: &[&str] = &["quad", "qquad"];

const ENVIRONMENTS: &[&str] = &["aligned", "align", "align*", "gathered", "split"];

/// Strip sizing delimiters, font and style wrappers, spacing commands,
/// alignment environments and trailing punctuation. Idempotent.
pub fn normalize_source(raw: &str) -> String {
    let mut current = raw.to_string();
    loop {
        let next = normalize_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn normalize_once(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '~' || c == '&' {
            out.push(' ');
            i += 1;
            continue;
        }
        if c != '\\' {
            out.push(c);
            i += 1;
            continue;
        }
        let Some(&next) = chars.get(i + 1) else {
            out.push(c);
            break;
        };
        if !next.is_ascii_alphabetic() {
            match next {
                ',' | ';' | '!' | ':' | ' ' | '\\' => out.push(' '),
                _ => {
                    out.push('\\');
                    out.push(next);
                }
            }
            i += 2;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && chars[j].is_ascii_alphabetic() {
            j += 1;
        }
        let name: String = chars[i + 1..j].iter().collect();
        if DROP_COMMANDS.contains(&name.as_str()) {
            out.push(' ');
            // `\left.` and `\right.` are null delimiters
            if chars.get(j) == Some(&'.') {
                j += 1;
            }
        } else if STYLE_COMMANDS.contains(&name.as_str()) || SPACE_COMMANDS.contains(&name.as_str()) {
            out.push(' ');
        } else if (name == "begin" || name == "end") && env_name(&chars, j).is_some() {
            let (env, after) = env_name(&chars, j).unwrap();
            if ENVIRONMENTS.contains(&env.as_str()) {
                out.push(' ');
                j = after;
            } else {
                out.push('\\');
                out.push_str(&name);
            }
        } else {
            out.push('\\');
            out.push_str(&name);
        }
        i = j;
    }
    let collapsed = out.split_whitespace().collect::<Vec<_>>().join(" ");
    strip_trailing_punctuation(&collapsed)
}

fn env_name(chars: &[char], start: usize) -> Option<(String, usize)> {
    if chars.get(start) != Some(&'{') {
        return None;
    }
    let close = chars[start..].iter().position(|&c| c == '}')? + start;
    Some((chars[start + 1..close].iter().collect(), close + 1))
}

fn strip_trailing_punctuation(s: &str) -> String {
    let mut t = s.trim_end();
    loop {
        // keep escaped characters such as `\;` intact for the next pass
        let stripped = t.trim_end_matches([',', '.', ';', ':']).trim_end();
        if stripped.ends_with('\\') || stripped == t {
            break;
        }
        t = stripped;
    }
    t.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_delimiters_and_spacing() {
        assert_eq!(normalize_source("\\left( x \\right)\\,"), "( x )");
        assert_eq!(normalize_source("x = y"), "x = y");
        assert_eq!(normalize_source("E = mc^2."), "E = mc^2");
    }

    #[test]
    fn strips_styles_but_keeps_arguments() {
        assert_eq!(normalize_source("v_{\\text{max}} = \\mathrm{d}"), "v_{ {max}} = {d}");
        assert_eq!(normalize_source("\\mathbf{E}\\quad=\\qquad 0;"), "{E} = 0");
        assert_eq!(normalize_source("\\left. x \\right|_0"), "x |_0");
    }

    #[test]
    fn removes_aligned_environment() {
        assert_eq!(normalize_source("\\begin{aligned} a &= b \\\\ &= c \\end{aligned}"), "a = b = c");
        assert_eq!(normalize_source("\\begin{pmatrix}"), "\\begin{pmatrix}");
    }

    #[test]
    fn does_not_touch_longer_command_names() {
        assert_eq!(normalize_source("\\rightarrow \\leftarrow"), "\\rightarrow \\leftarrow");
        assert_eq!(normalize_source("\\textrm{a} \\text"), "{a}");
    }
}
