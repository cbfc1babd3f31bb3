//! E-utilities XML parsing.

use roxmltree::{Document as Xml, Node};

/// One `PubmedArticle` from an efetch response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedArticle {
    pub pmid: String,
    pub year: Option<i32>,
    /// Abstract sections joined by single spaces; `None` when absent or blank.
    pub abstract_text: Option<String>,
    /// The article's own XML, as cached.
    pub xml: String,
}

/// E-utilities responses carry a DOCTYPE; entity expansion stays bounded by
/// roxmltree's own limits.
fn parse_xml(xml: &str) -> Result<Xml<'_>, String> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    Xml::parse_with_options(xml, opts).map_err(|e| e.to_string())
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn path<'a, 'i>(node: Node<'a, 'i>, names: &[&str]) -> Option<Node<'a, 'i>> {
    names.iter().try_fold(node, |n, name| child(n, name))
}

/// Concatenated text of a node and its descendants (inline markup such as
/// `<i>` or `<sup>` is flattened).
fn all_text(node: Node<'_, '_>) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect()
}

/// First run of four digits, as in `MedlineDate` values like "1998-1999" or
/// "Winter 2001".
pub fn first_year(s: &str) -> Option<i32> {
    let bytes = s.as_bytes();
    (0..bytes.len().saturating_sub(3)).find_map(|i| {
        let w = &bytes[i..i + 4];
        let bounded = (i == 0 || !bytes[i - 1].is_ascii_digit())
            && bytes.get(i + 4).is_none_or(|b| !b.is_ascii_digit());
        (bounded && w.iter().all(u8::is_ascii_digit))
            .then(|| s[i..i + 4].parse().ok())
            .flatten()
    })
}

/// Ids from an esearch `IdList`, in response order.
pub fn parse_esearch(xml: &str) -> Result<Vec<String>, String> {
    let doc = parse_xml(xml)?;
    let root = doc.root_element();
    if !root.has_tag_name("eSearchResult") {
        return Err(format!(
            "unexpected root element <{}>",
            root.tag_name().name()
        ));
    }
    if let Some(err) = child(root, "ERROR") {
        return Err(format!("esearch error: {}", all_text(err)));
    }
    Ok(child(root, "IdList")
        .map(|list| {
            list.children()
                .filter(|n| n.has_tag_name("Id"))
                .map(|n| all_text(n).trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default())
}

fn article_year(citation: Node<'_, '_>) -> Option<i32> {
    let article = child(citation, "Article")?;
    if let Some(date) = path(article, &["Journal", "JournalIssue", "PubDate"]) {
        if let Some(y) = child(date, "Year").and_then(|y| all_text(y).trim().parse().ok()) {
            return Some(y);
        }
        if let Some(y) = child(date, "MedlineDate").and_then(|m| first_year(&all_text(m))) {
            return Some(y);
        }
    }
    path(article, &["ArticleDate", "Year"]).and_then(|y| all_text(y).trim().parse().ok())
}

fn article_abstract(citation: Node<'_, '_>) -> Option<String> {
    let abs = path(citation, &["Article", "Abstract"])?;
    let parts: Vec<String> = abs
        .children()
        .filter(|n| n.has_tag_name("AbstractText"))
        .map(|n| all_text(n).split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|t| !t.is_empty())
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

/// Articles of an efetch `PubmedArticleSet` (book records are skipped).
pub fn parse_efetch(xml: &str) -> Result<Vec<FetchedArticle>, String> {
    let doc = parse_xml(xml)?;
    let root = doc.root_element();
    if !root.has_tag_name("PubmedArticleSet") {
        return Err(format!(
            "unexpected root element <{}>",
            root.tag_name().name()
        ));
    }
    root.children()
        .filter(|n| n.has_tag_name("PubmedArticle"))
        .map(|art| {
            let citation =
                child(art, "MedlineCitation").ok_or("PubmedArticle without MedlineCitation")?;
            let pmid = child(citation, "PMID")
                .map(|p| all_text(p).trim().to_string())
                .filter(|p| !p.is_empty())
                .ok_or("MedlineCitation without PMID")?;
            Ok(FetchedArticle {
                year: article_year(citation),
                abstract_text: article_abstract(citation),
                xml: xml[art.range()].to_string(),
                pmid,
            })
        })
        .collect()
}

/// Parse one cached article fragment.
pub fn parse_cached_article(fragment: &str) -> Result<FetchedArticle, String> {
    let wrapped = format!("<PubmedArticleSet>{fragment}</PubmedArticleSet>");
    let mut arts = parse_efetch(&wrapped)?;
    match arts.len() {
        1 => Ok(arts.remove(0)),
        n => Err(format!("cached fragment holds {n} articles")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_year_rules() {
        assert_eq!(first_year("1998-1999"), Some(1998));
        assert_eq!(first_year("Winter 2001"), Some(2001));
        assert_eq!(first_year("2003 Dec-2004 Jan"), Some(2003));
        assert_eq!(first_year("12345"), None);
        assert_eq!(first_year("Spring"), None);
    }
}
