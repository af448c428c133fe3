use super::Theme;

/// The built-in search queries: broad challenge-idea queries first, then
/// queries aimed at one life area each.
pub(super) const QUERIES: &[(Theme, &str)] = &[
    (Theme::General, "fun and simple 30 day challenge ideas"),
    (Theme::General, "unique monthly challenge list for personal growth"),
    (Theme::General, "30 day self improvement challenge ideas"),
    (Theme::General, "30 day challenge ideas"),
    (Theme::General, "easy monthly challenges to try at home"),
    (Theme::General, "personal growth monthly challenge inspiration"),
    (Theme::General, "daily habit building 30 day challenge"),
    (Theme::General, "creative and productive monthly challenges"),
    (Theme::General, "motivational 30 day life improvement challenge"),
    (Theme::General, "list of fun challenges to do each month"),
    (Theme::General, "ideas for a different 30 day challenge each month"),
    (Theme::Themed, "30 day fitness challenge ideas"),
    (Theme::Themed, "monthly wellness challenge for healthy habits"),
    (Theme::Themed, "monthly learning challenge for self-education"),
    (Theme::Themed, "30 day study challenge ideas for students"),
    (Theme::Themed, "monthly art challenge prompts for creativity"),
    (Theme::Themed, "30 day writing challenge for creative practice"),
    (Theme::Themed, "monthly productivity challenge for better habits"),
    (Theme::Themed, "30 day organization challenge for time management"),
    (Theme::Themed, "monthly sustainability challenge for eco-friendly living"),
    (Theme::Themed, "30 day low waste lifestyle challenge"),
    (Theme::Themed, "monthly money saving challenge ideas"),
    (Theme::Themed, "30 day no spend challenge for budgeting"),
    (Theme::Themed, "monthly kindness challenge for better relationships"),
    (Theme::Themed, "30 day social skills improvement challenge"),
];

/// Social media, marketplaces and forums: pages there rarely carry a
/// readable list of challenge ideas.
pub(super) const BLOCKED_DOMAINS: &str = include_str!("../../data/blocklist.txt");
