use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ChallengeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Student {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Teacher {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Class {
    pub id: String,
    pub name: String,
    /// Ids of teachers bound to this class.
    #[serde(default)]
    pub teachers: BTreeSet<String>,
    pub students: Vec<Student>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct School {
    pub id: String,
    pub name: String,
    /// Building holding this school's sensors, if any.
    #[serde(default)]
    pub building_id: Option<String>,
    pub classes: Vec<Class>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterFile {
    pub schools: Vec<School>,
    pub teachers: Vec<Teacher>,
}

/// Indexed roster. Every student sits in exactly one class and every class
/// in exactly one school.
#[derive(Debug, Clone)]
pub struct Roster {
    file: RosterFile,
    student_class: BTreeMap<String, (usize, usize)>,
    class_index: BTreeMap<String, (usize, usize)>,
    teachers: BTreeMap<String, Teacher>,
}

impl Roster {
    pub fn from_json(s: &str) -> Result<Self, ChallengeError> {
        let file: RosterFile = serde_json::from_str(s)
            .map_err(|e| ChallengeError::Validation(format!("roster: {e}")))?;
        Self::new(file)
    }

    pub fn load(path: &Path) -> Result<Self, ChallengeError> {
        let s = std::fs::read_to_string(path).map_err(|e| {
            ChallengeError::Validation(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&s)
    }

    pub fn new(file: RosterFile) -> Result<Self, ChallengeError> {
        let mut problems = Vec::new();
        let mut teachers = BTreeMap::new();
        for t in &file.teachers {
            if teachers.insert(t.id.clone(), t.clone()).is_some() {
                problems.push(format!("duplicate teacher {:?}", t.id));
            }
        }
        let mut schools = BTreeSet::new();
        let mut student_class = BTreeMap::new();
        let mut class_index = BTreeMap::new();
        for (si, school) in file.schools.iter().enumerate() {
            if !schools.insert(&school.id) {
                problems.push(format!("duplicate school {:?}", school.id));
            }
            for (ci, class) in school.classes.iter().enumerate() {
                if class_index.insert(class.id.clone(), (si, ci)).is_some() {
                    problems.push(format!("class {:?} appears more than once", class.id));
                }
                for t in class.teachers.iter().filter(|t| !teachers.contains_key(*t)) {
                    problems.push(format!("class {:?} names unknown teacher {t:?}", class.id));
                }
                for s in &class.students {
                    if student_class.insert(s.id.clone(), (si, ci)).is_some() {
                        problems.push(format!("student {:?} appears in more than one class", s.id));
                    }
                }
            }
        }
        if !problems.is_empty() {
            return Err(ChallengeError::Validation(format!(
                "roster: {}",
                problems.join("; ")
            )));
        }
        Ok(Roster {
            file,
            student_class,
            class_index,
            teachers,
        })
    }

    pub fn file(&self) -> &RosterFile {
        &self.file
    }

    pub fn schools(&self) -> &[School] {
        &self.file.schools
    }

    pub fn classes(&self) -> impl Iterator<Item = (&School, &Class)> {
        self.file
            .schools
            .iter()
            .flat_map(|s| s.classes.iter().map(move |c| (s, c)))
    }

    pub fn class(&self, id: &str) -> Option<(&School, &Class)> {
        self.class_index.get(id).map(|&(si, ci)| {
            let s = &self.file.schools[si];
            (s, &s.classes[ci])
        })
    }

    pub fn school(&self, id: &str) -> Option<&School> {
        self.file.schools.iter().find(|s| s.id == id)
    }

    pub fn student(&self, id: &str) -> Option<&Student> {
        let (_, class) = self.class_of(id)?;
        class.students.iter().find(|s| s.id == id)
    }

    /// School and class of a student.
    pub fn class_of(&self, student_id: &str) -> Option<(&School, &Class)> {
        self.student_class.get(student_id).map(|&(si, ci)| {
            let s = &self.file.schools[si];
            (s, &s.classes[ci])
        })
    }

    pub fn teacher(&self, id: &str) -> Option<&Teacher> {
        self.teachers.get(id)
    }

    pub fn teaches(&self, teacher_id: &str, class_id: &str) -> bool {
        self.class(class_id)
            .is_some_and(|(_, c)| c.teachers.contains(teacher_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> RosterFile {
        RosterFile {
            schools: vec![School {
                id: "s1".into(),
                name: "S".into(),
                building_id: None,
                classes: vec![Class {
                    id: "c1".into(),
                    name: "C".into(),
                    teachers: ["t1".to_string()].into(),
                    students: vec![Student {
                        id: "u1".into(),
                        name: "U".into(),
                    }],
                }],
            }],
            teachers: vec![Teacher {
                id: "t1".into(),
                name: "T".into(),
            }],
        }
    }

    #[test]
    fn lookups() {
        let r = Roster::new(file()).unwrap();
        assert_eq!(r.class_of("u1").unwrap().1.id, "c1");
        assert!(r.teaches("t1", "c1"));
        assert!(!r.teaches("t2", "c1"));
        assert!(r.student("nobody").is_none());
    }

    #[test]
    fn student_in_two_classes_rejected() {
        let mut f = file();
        let mut c2 = f.schools[0].classes[0].clone();
        c2.id = "c2".into();
        f.schools[0].classes.push(c2);
        assert!(matches!(Roster::new(f), Err(ChallengeError::Validation(_))));
    }

    #[test]
    fn unknown_teacher_rejected() {
        let mut f = file();
        f.teachers.clear();
        assert!(Roster::new(f).is_err());
    }
}
