use scraper::{Html, Node};

/// Elements whose whole subtree is boilerplate or non-text.
const SKIPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "noscript", "template", "head", "svg", "iframe",
];

/// Elements that start a new line of text.
const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "details", "div", "dl",
    "dt", "fieldset", "figcaption", "figure", "form", "h1", "h2", "h3", "h4", "h5", "h6", "hr",
    "html", "li", "main", "ol", "p", "pre", "section", "summary", "table", "tbody", "td", "tfoot",
    "th", "thead", "tr", "ul",
];

/// Reduces an HTML page to its readable body text.
///
/// Boilerplate elements are dropped with their contents, block elements are
/// separated by newlines, runs of whitespace inside a line collapse to one
/// space, and blank lines are removed. Malformed markup is handled by the
/// parser's error recovery.
pub fn html_to_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let mut raw = String::new();
    walk(doc.tree.root(), &mut raw);
    raw.lines()
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn walk(node: ego_tree::NodeRef<'_, Node>, out: &mut String) {
    match node.value() {
        Node::Text(text) => out.push_str(text),
        Node::Element(el) => {
            let name = el.name();
            if SKIPPED.contains(&name) {
                return;
            }
            let block = BLOCKS.contains(&name);
            if block {
                out.push('\n');
            }
            for child in node.children() {
                walk(child, out);
            }
            if block {
                out.push('\n');
            }
        }
        Node::Document | Node::Fragment => {
            for child in node.children() {
                walk(child, out);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_footer_are_dropped() {
        assert_eq!(
            html_to_text("<body><header>N</header><p>Hello</p><footer>F</footer></body>"),
            "Hello"
        );
    }

    #[test]
    fn blocks_become_lines() {
        assert_eq!(html_to_text("<p>a</p><p>b</p>"), "a\nb");
    }

    #[test]
    fn scripts_are_dropped() {
        assert_eq!(html_to_text("<div>x <script>evil()</script>y</div>"), "x y");
    }

    #[test]
    fn malformed_markup_degrades() {
        assert_eq!(html_to_text("<p>open <b>bold</p><li>item"), "open bold\nitem");
        assert_eq!(html_to_text(""), "");
    }

    #[test]
    fn nav_and_style_are_dropped() {
        let html = "<html><head><title>T</title><style>p{}</style></head>\
                    <body><nav><a>Home</a></nav><main><h1>Ideas</h1><ul><li>Walk</li>\
                    <li>Read   daily</li></ul></main></body></html>";
        assert_eq!(html_to_text(html), "Ideas\nWalk\nRead daily");
    }

    fn fragment() -> impl Strategy<Value = String> {
        let word = "[a-z]{1,6}";
        let leaf = prop_oneof![
            word.prop_map(|w| w.to_string()),
            Just(" ".to_string()),
            Just("<br>".to_string()),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            (
                prop::sample::select(vec!["p", "div", "span", "b", "li", "script", "nav", "td"]),
                prop::collection::vec(inner, 0..4),
            )
                .prop_map(|(tag, kids)| format!("<{tag}>{}</{tag}>", kids.concat()))
        })
    }

    proptest! {
        #[test]
        fn output_has_no_tags(html in fragment()) {
            let text = html_to_text(&html);
            prop_assert!(!text.contains('<') && !text.contains('>'));
            prop_assert!(!text.contains("  "));
            prop_assert!(text.lines().all(|l| !l.trim().is_empty()));
        }
    }
}
