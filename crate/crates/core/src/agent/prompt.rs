//! Prompt text and assembly.

use super::{AgentError, Message, Mode, Task};
use crate::answer::SldpKind;
use crate::baseline::{serialize_graph, SerializationConfig};
use crate::scene_graph::PropertyGraph;

const SYSTEM_PDDL: &str = "You are a helpful assistant who is an expert at assigning \
robots PDDL planning goals based on natural language commands grounded in 3D \
scene graphs.";

const SYSTEM_QA: &str = "You are a helpful assistant who is an expert at answering \
questions about 3D scene graphs.";

const SYSTEM_CYPHER_PDDL: &str = " You have access to a database representing a 3D scene graph, which \
stores spatial information that a robot can use to understand the world. Given a \
command, your task is to generate a Cypher query that queries the relevant \
information from the database. Then, use this information to formulate a PDDL \
goal for a robot. Given a 3D Scene Graph and an instruction, use the provided \
tool to query information from the scene graph. When you have enough \
information, submit your final answer.";

const SYSTEM_CYPHER_QA: &str = " You have access to a database representing a 3D scene graph, which \
stores spatial information that a robot can use to understand the world. Given a \
question, your task is to generate a Cypher query that queries the relevant \
information from the database. Then, use this information to answer the \
question. Given a 3D Scene Graph and a question, use the provided tool to query \
information from the scene graph. When you have enough information, submit your \
final answer.";

const SYSTEM_CYPHER_TAIL: &str = " Explain your reasoning before each Cypher query. When producing a final \
answer, follow the format and be concise.";

const SYSTEM_CONTEXT: &str = " You are given a 3D scene graph written out as text, which stores spatial \
information that a robot can use to understand the world. Use it to answer the \
user input. When producing a final answer, follow the format and be concise.";

const SCENE_GRAPH_DESCRIPTION: &str = "<Scene Graph Description> A 3D scene graph is a hierarchical \
graph consisting of layers that each contain nodes. Graphs have the 2D Places \
layer, the 3D Places layer, the Objects layer, and the Rooms layer.

3D Places Layer (PLACES): The 3D Places layer in the scene graph contains places \
that are reachable locations in the world. Each Place node has a unique ID \
(p<id>). Note that the unique ID uses a lowercase 'p' for the 3D Places layer. \
The term for a node in this layer is a 'Place' node, NOT a 'Mesh Place' node.

2D Places Layer (MESH_PLACES): The 2D Places layer contains Places that are \
reachable locations in the world with a possible semantic class (type). Each \
Place node has a unique ID (P<id>). Note that the unique ID uses an uppercase \
'P' for the 2D Places layer. The term for a node in this layer is a 'Mesh Place' \
node, NOT a 'Place' node.

Objects Layer (OBJECTS): The Objects layer contains Objects that exist in the \
world. Each Object has a unique ID (O<id>), a semantic class (type), an x,y,z \
position (pos), and a parent. The parent can be a Place or a Mesh Place, \
indicating which Place or Mesh Place the Object belongs to. Each Object will be \
represented in the form: (id, type, pos, parent_place).

Rooms Layer (ROOMS): The Rooms Layer contains Rooms that exist in the world. \
Each Room has a unique ID (R<id>), a semantic class (type), and an x,y,z \
position (pos). Each Room will be represented in the form: (R<id>, type, pos).

A graph can have either a 2D Places Layer, or a 3D Places Layer, or both. The \
hierarchy is strict: an Object's parent is always a Place or Mesh Place. A \
Place's parent is always a Room. Therefore, to find all objects in a room, you \
must first find all places that are children of that room, and then find all \
objects that have one of those places as a parent. </Scene Graph Description>";

pub const CYPHER_SCHEMA: &str = "Labels in Database:
    - Object: a node representing an object in the world.
        - nodeSymbol: a unique string identifier
        - class: a string identifying the object's semantic class or type
        - center: the 3D position of the object, as a POINT type
    - MeshPlace: a node representing a 2D segment of space the robot might be
                 able to move to.
        - nodeSymbol: a unique string identifier
        - class: a string identifying the place's semantic class or type
        - center: the 3D position of the mesh place, as a POINT type
    - Place: a node representing a 3D region of free space
        - nodeSymbol: a unique string identifier
        - center: the 3D position of the place, as a POINT type
    - Room: a node representing a room or higher-level region
        - nodeSymbol: a unique string identifier
        - class: a string identifying the room's semantic class or type
        - center: the 3D position of the room, as a POINT type

Object, MeshPlace, Place, and Room are all Cypher labels attached to nodes.

Places and Mesh Places represent a higher level of the hierarchy compared to \
objects, but lower level than rooms.

There are two kinds of existing edges. First is (a)-[:CONTAINS]->(b), which \
connects nodes between different layers and means that b is contained within a. \
Nodes in higher levels of the hierarchy may contain nodes in lower levels of the \
hierarchy, but nodes in the lower level of the hierarchy will not contain \
higher-level nodes. The other kind of edges represent connectivity within a \
layer: [:OBJECT_CONNECTED], [:PLACE_CONNECTED], [:MESH_PLACE_CONNECTED], \
[:ROOM_CONNECTED]. Remember that (a)-[:CONTAINS*]->(b) will match transitive \
relationships.

Note that in the current version of cypher, `distance` has been replaced by \
`point.distance`. Also, do not use any apoc functions in your queries.";

pub const PDDL_DOMAIN: &str = "<PDDL Domain>

The PDDL domain consists of the following predicates described below. These \
predicates get parameterized by symbols from a 3D scene graph. \
(visited-place ?P): This predicate indicates that a robot must visit Place \
'?P' at some point, where '?P' is a placeholder for a Place ID. (at-place \
?P): This predicate indicates that a robot must be at Place '?P', where '?P' \
is a placeholder for a Place ID. (visited-object ?O): This predicate \
indicates that a robot must visit Object '?O' at some point, where '?O' is a \
placeholder for an Object ID. (at-object ?O): This predicate indicates that \
a robot must be at Object '?O', where '?O' is a placeholder for an Object \
ID. (safe ?O): This predicate indicates that a robot must inspect Object \
'?O', where '?O' is a placeholder for an Object ID. (visited-room ?R): This \
predicate indicates that a robot must visit Room '?R' at some point, where \
'?R' is a placeholder for a Room ID. (in-room ?R): This predicate indicates \
that a robot must be at Room '?R', where '?R' is a placeholder for a Room \
ID. The 'at' and 'visited' predicates are useful for specifying locations \
for robots to go. When an instruction indicates an order, you should use \
(at-place ?P), (at-object ?O), or (in-room ?R) to specify the final goal and \
(visited-place ?P), (visited-object ?O), or (visited-room ?R) to specify the \
intermediate goals.

(holding ?O): This predicate indicates the a robot must be holding an Object \
'?O', where '?O' is a placeholder for an Object ID. The 'holding' predicate \
is useful for specifying that a robot should pick up an object.

(object-in-place ?O ?P): This predicate indicates that an Object '?O' must \
be located inside a Place '?P', where '?O' is a placeholder for an Object ID \
and '?P' is a placeholder for a Place ID. The 'object-in-place' predicate is \
useful for specifying that a robot should place an object somewhere. If the \
robot should move an object from one place to another, you should use the \
'object-in-place' predicate for the goal instead of the 'holding' predicate.

You can compose PDDL goal predicates into more complex goals using the \
following operators: not: the 'not' operator negates the truth value of the \
predicate. For example '(not (visited-room R1))' means Room 'R1' should not \
be visited. and: the 'and' operator is used to indicate that multiple \
predicates must be true. For example '(and (visited-room R1) (visited-object \
O1))' means both Room 'R1' and Object 'O1' must be visited. or: the 'or' \
operator is used to indicate that either one predicate or another predicate \
must be true. For example '(or (visited-room R1) (visited-object O1))' means \
that either Room 'R1' or Object 'O1' must be visited. If an instruction is \
not specific about which object, place, mesh place, or room that it is \
referring to, you MUST use the 'or' operator to construct a PDDL goal. This \
lets the planner determine which goal to achieve.

</PDDL Domain>";

const IN_CONTEXT_NOTES: &str = "<scene_graph_notes>
Objects Layer: The Objects layer contains Objects that exist in the world. \
Each Object has a unique ID (id), a semantic class (type), an x,y,z position \
(pos), and a set of parent Places (parent_places). The parent Places indicate \
which Places the Object belongs to. Each Object will be represented in the \
form: (id, type, pos, parent_places).
Places / Mesh Places Layer: The Places / Mesh Places layer contains Places \
that are reachable locations in the world. Each Place node has a unique ID \
(id), a set of sibling Places (siblings) and a set of parent Rooms \
(parent_rooms). Each Place will be represented in the form (id, siblings, \
parent_rooms).
Rooms Layer: The Rooms Layer contains Rooms that exist in the world. Each Room \
has a unique ID (id), a semantic class (type), an x,y,z position (pos), and a \
set of sibling Rooms (siblings). Each Room will be represented in the form: \
(id, type, pos, siblings).
</scene_graph_notes>";

const PDDL_EXAMPLES_HEADER: &str = "The following is a set of examples of mapping instructions \
to PDDL goals (assuming the results of a Cypher query).";

const PDDL_EXAMPLES: &[(&str, &str)] = &[
    (
        "Instruction: Head to place 100.",
        "<answer>(visited-place P100)</answer>",
    ),
    (
        "Instruction: Move over to the trash.",
        "<answer>(visited-object O15)</answer>",
    ),
    ("Instruction: Go to room 1.", "<answer>(visited-room R1)</answer>"),
    ("Instruction: Inspect the trash.", "<answer>(safe O15)</answer>"),
    ("Instruction: Pick up the box", "<answer>(holding O120)</answer>"),
    (
        "Instruction: Move the box to mesh place 11.",
        "<answer>(object-in-place O120 P11)</answer>",
    ),
    (
        "Instruction: First pick up the box and then head over to the trash.",
        "<answer>(and (holding O120) (at-object O15))</answer>",
    ),
    (
        "Instruction: Move to one of the poles on the sidewalk.",
        "<answer>(or (visited-object O155) (visited-object O160) (visited-object O185))</answer>",
    ),
    (
        "Instruction: Go pick up one of the poles on the sidewalk.",
        "<answer>(or (holding O155) (holding O160) (holding O185))</answer>",
    ),
];

const CONTEXT_PDDL_EXAMPLES_HEADER: &str =
    "Here are some examples of mapping from natural language instructions to PDDL goals
paired with robot IDs. Each example uses the 3D scene graph below. Note that this
3D scene graph is just for these examples and you should NOT use this when
answering the new instruction.
<Example 3D Scene Graph>
Objects:
- (id=O0, type=tree, pos=(-3.14,1.13,0.1), parent_places={'p4'})
- (id=O1, type=vehicle, pos=(3.34,3.53,0.1), parent_places={'p0'})
- (id=O2, type=door, pos=(3.33,3.48,0.2), parent_places={'p4'})
- (id=O3, type=tree, pos=(4.47,-4.72,-0.1), parent_places={'p5'})
- (id=O4, type=vehicle, pos=(-2.51,6.63,0.2), parent_places={'p3'})
- (id=O5, type=boat, pos=(1.34,3.28,-0.2), parent_places={'p2'})
- (id=O6, type=seating, pos=(1.37,3.03,0.01), parent_places={'p2'})
- (id=O7, type=tree, pos=(9.10,-2.01,0.04), parent_places={'p6'})
Places:
- (id=p0, siblings={'p1','p4'}, parent_rooms={'R0'})
- (id=p1, siblings={'p0','p4'}, parent_rooms={'R0'})
- (id=p2, siblings={'p3'}, parent_rooms={'R1'})
- (id=p3, siblings={'p2'}, parent_rooms={'R1'})
- (id=p4, siblings={'p0','p1'}, parent_rooms={'R0'})
- (id=p5, siblings={'p6'}, parent_rooms={'R2'})
- (id=p6, siblings={'p5'}, parent_rooms={'R2'})
Rooms:
- (id=R0, type=parking_lot, pos=(1.17,2.71,0.01), siblings=none)
- (id=R1, type=dock, pos=(0.67,4.31,0.09), siblings=none)
- (id=R2, type=courtyard, pos=(6.79,2.31,-0.01), siblings=none)
</Example 3D Scene Graph>";

const CONTEXT_PDDL_EXAMPLES: &[(&str, &str)] = &[
    ("Go to object 1.", "<answer>(visited-object O1)</answer>"),
    ("Move to o1.", "<answer>(visited-object O1)</answer>"),
    ("Head to place 100.", "<answer>(visited-place P100)</answer>"),
    ("Head to room 21.", "<answer>(visited-place R21)</answer>"),
    (
        "Drive over to the door and visit the boat.",
        "<answer>(and (visited-object O2) (visited-object O5))</answer>",
    ),
    (
        "Walk over to the door or end up by the boat.",
        "<answer>(or (visited-object O2) (visited-object O5))</answer>",
    ),
    (
        "Head over to the door and move to the boat.",
        "<answer>(and (visited-object O2) (visited-object O5))</answer>",
    ),
    (
        "Could you navigate to the vehicle on the dock?",
        "<answer>(visited-object O4)</answer>",
    ),
    ("Head to the rightmost vehicle.", "<answer>(visited-object O1)</answer>"),
    (
        "Move to the vehicle on the left.",
        "<answer>(visited-object O4)</answer>",
    ),
    (
        "I need you to go to the parking lot and the dock.",
        "<answer>(and (visited-place R0) (visited-place R1))</answer>",
    ),
];

const QA_EXAMPLES_HEADER: &str = "The following is a set of examples of answering questions \
about a 3D scene graph (assuming the results of a Cypher query).";

const QA_EXAMPLES: &[(&str, &str)] = &[
    ("Question: How many trees are there?", "<answer>12</answer>"),
    ("Question: Which rooms contain a vehicle?", "<answer><R1, R4></answer>"),
    ("Question: Where is the bag?", "<answer>POINT(1.5 -2.25 0.1)</answer>"),
    (
        "Question: How many objects of each type are in room 2?",
        "<answer>{box: 2, tree: 5}</answer>",
    ),
    (
        "Question: List the rooms from west to east.",
        "<answer>[R3, R0, R2]</answer>",
    ),
];

const NOW_PDDL: &str = "Now, generate a PDDL goal for this command:";
const NOW_QA: &str = "Now, answer this question:";
const CONCISE: &str = "Make your answer as concise as possible";
const PDDL_FOOTER: &str = "Return the PDDL goal between two answer tags, e.g. <answer> pddl goes here </answer>";

const SLDP_FORMAT: &str = "### Syntax
A primitive string is a sequence of alphanumeric characters (with no quotation).
A primitive number is a floating point representation of a number.
A `list` is written as `[element1, element2, ... elementN]`
A `set` is written as `<element1, element2, ... elementN>`
A `dict` is written as `{k1: v1, k2: v2}`
A `point` is written as `POINT(x y z)` (note the lack of comma)
### Denoting Final Answer:
Format your final answer (*not* any intermediate tool calls) as an SLDP
expression wrapped between <answer> and </answer> tags, such as
<answer><1,2,3></answer>. Only a single pair of answer tags should appear in
your solution.";

/// Sent after the single tool result in the two-phase pipeline.
pub const SINGLE_FINAL_PROMPT: &str = "Using the query result above, provide your final answer now.";
/// Sent when the model attempts a tool call past the limit.
pub const FORCE_FINAL: &str = "You have used all tool calls. Provide your final answer now.";
/// Prefix for tool results delivered as plain user text.
pub const TEXT_RESULT_PREFIX: &str = "Query result:\n";

/// Everything a prompt is assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub task: Task,
    pub system: String,
    pub ontology: String,
    pub labelspace: String,
    pub interface: String,
    pub pddl_domain: Option<String>,
    pub examples_header: String,
    pub examples: Vec<(String, String)>,
    pub input: String,
    pub answer_kind: Option<SldpKind>,
}

impl PromptSpec {
    /// Standard prompt for `mode` over `graph`. Context mode embeds the
    /// serialized graph in place of the database description.
    pub fn for_graph(
        task: Task,
        mode: Mode,
        graph: &PropertyGraph,
        input: &str,
        answer_kind: Option<SldpKind>,
        max_calls: usize,
    ) -> PromptSpec {
        let role = match task {
            Task::Pddl => SYSTEM_PDDL,
            Task::Qa => SYSTEM_QA,
        };
        let system = match mode {
            Mode::Context => format!("{role}{SYSTEM_CONTEXT}"),
            _ => {
                let body = match task {
                    Task::Pddl => SYSTEM_CYPHER_PDDL,
                    Task::Qa => SYSTEM_CYPHER_QA,
                };
                let budget = match mode {
                    Mode::Single => " You can call the cypher query tool once.".to_string(),
                    _ => format!(" You can call the cypher query tool up to {max_calls} times."),
                };
                format!("{role}{body}{budget}{SYSTEM_CYPHER_TAIL}")
            }
        };
        let interface = match mode {
            Mode::Context => format!(
                "{IN_CONTEXT_NOTES}\n<3D Scene Graph>\n{}</3D Scene Graph>",
                serialize_graph(graph, &SerializationConfig::default())
            ),
            _ => CYPHER_SCHEMA.to_string(),
        };
        let (header, examples) = match (task, mode) {
            (Task::Pddl, Mode::Context) => (CONTEXT_PDDL_EXAMPLES_HEADER, CONTEXT_PDDL_EXAMPLES),
            (Task::Pddl, _) => (PDDL_EXAMPLES_HEADER, PDDL_EXAMPLES),
            (Task::Qa, _) => (QA_EXAMPLES_HEADER, QA_EXAMPLES),
        };
        PromptSpec {
            task,
            system,
            ontology: SCENE_GRAPH_DESCRIPTION.to_string(),
            labelspace: labelspace_text(graph),
            interface,
            pddl_domain: (task == Task::Pddl).then(|| PDDL_DOMAIN.to_string()),
            examples_header: header.to_string(),
            examples: examples.iter().map(|(u, a)| (u.to_string(), a.to_string())).collect(),
            input: input.to_string(),
            answer_kind,
        }
    }
}

pub fn labelspace_text(graph: &PropertyGraph) -> String {
    let ls = graph.labelspace();
    format!(
        "<Labelspace Description>\nThese are the labels available in the scene graph at each layer. Synonyms should\n\
         be mapped to a label in the the list.\n\n\
         <object_labels> {} </object_labels>\n\n\
         <room_labels> {} </room_labels>\n\n\
         <mesh_places_labels> {} </mesh_places_labels>\n\n\
         </Labelspace Description>",
        ls.objects.join(" "),
        ls.rooms.join(" "),
        ls.mesh_places.join(" ")
    )
}

pub fn answer_footer(task: Task, kind: Option<SldpKind>) -> String {
    match (task, kind) {
        (Task::Pddl, _) => format!("{CONCISE}\n{PDDL_FOOTER}"),
        (Task::Qa, Some(k)) => format!("{CONCISE}\n{SLDP_FORMAT}\nYour answer should be an SLDP {k}"),
        (Task::Qa, None) => format!("{CONCISE}\n{SLDP_FORMAT}"),
    }
}

/// Messages in skeleton order: system role, ontology, labelspace, interface,
/// PDDL domain (pddl only), examples, the input, then the answer footer.
pub fn build_prompt(spec: &PromptSpec) -> Result<Vec<Message>, AgentError> {
    let missing = |what: &str| Err(AgentError::Config(format!("prompt is missing {what}")));
    if spec.system.trim().is_empty() {
        return missing("the system text");
    }
    if spec.interface.trim().is_empty() {
        return missing("the interface description");
    }
    if spec.input.trim().is_empty() {
        return missing("the user input");
    }
    match spec.task {
        Task::Pddl if spec.pddl_domain.as_deref().is_none_or(|d| d.trim().is_empty()) => {
            return missing("the PDDL domain description");
        }
        Task::Qa if spec.answer_kind.is_none() => return missing("the expected answer kind"),
        _ => {}
    }
    let mut out = vec![
        Message::system(&spec.system),
        Message::system(&spec.ontology),
        Message::system(&spec.labelspace),
        Message::system(&spec.interface),
    ];
    if let (Task::Pddl, Some(domain)) = (spec.task, &spec.pddl_domain) {
        out.push(Message::system(domain));
    }
    if !spec.examples.is_empty() {
        out.push(Message::system(&spec.examples_header));
        for (u, a) in &spec.examples {
            out.push(Message::user(u));
            out.push(Message::example_reply(a));
        }
    }
    out.push(Message::system(match spec.task {
        Task::Pddl => NOW_PDDL,
        Task::Qa => NOW_QA,
    }));
    out.push(Message::user(&spec.input));
    out.push(Message::system(&answer_footer(spec.task, spec.answer_kind)));
    Ok(out)
}
