//! Bundled demo quest map and roster.

use crate::map::QuestMap;
use crate::roster::Roster;

pub const DEMO_QUEST_MAP_JSON: &str = include_str!("../demo/quest_map.json");
pub const DEMO_ROSTER_JSON: &str = include_str!("../demo/roster.json");

pub fn demo_quest_map() -> QuestMap {
    QuestMap::from_json(DEMO_QUEST_MAP_JSON).expect("bundled quest map is valid")
}

pub fn demo_roster() -> Roster {
    Roster::from_json(DEMO_ROSTER_JSON).expect("bundled roster is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::QuestKind;

    #[test]
    fn demo_content_meets_minimums() {
        let m = demo_quest_map();
        for area in 1..=5 {
            assert!(
                m.quests().filter(|q| q.area == area).count() >= 2,
                "area {area}"
            );
        }
        assert!(m.quests().filter(|q| q.kind == QuestKind::LiveData).count() >= 1);
        assert_eq!(m.bonus_area().len(), 2);
        assert_eq!(m.labkit_area().len(), 2);
        assert!(m.get("l-components").is_some());
        let r = demo_roster();
        assert_eq!(r.classes().count(), 3);
    }
}
