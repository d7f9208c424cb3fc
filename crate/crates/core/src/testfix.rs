//! Inline fixtures shared across unit tests.

pub(crate) const AMINER_FIXTURE: &str = concat!(
    r#"{"id":"p1","kind":"scholar","attributes":{"name":"Yann Lecun","organization":"New York University","interest":["AI","Machine Learning","Computer Vision","Robotics","Image Compression"],"email":"yl22@nyu.edu","citation_count":180000,"publication_count":350},"relations":{}}"#,
    "\n",
    r#"{"id":"p2","kind":"scholar","attributes":{"name":"Alice Zhang","organization":"MIT","interest":["Databases"],"citation_count":900,"publication_count":40},"relations":{}}"#,
    "\n",
    r#"{"id":"p3","kind":"scholar","attributes":{"name":"Bob Iverson","organization":"Oxford","citation_count":50,"publication_count":3},"relations":{}}"#,
    "\n",
    r#"{"id":"w1","kind":"publication","attributes":{"title":"Gradient Based Learning","year":1998,"abstract":"A study of gradient based methods.","citation_count":40000},"relations":{"authors":["p1","p2"]}}"#,
    "\n",
    r#"{"id":"w2","kind":"publication","attributes":{"title":"Databases at Scale","year":2015,"abstract":"Scaling transactional systems.","citation_count":300},"relations":{"authors":["p2"]}}"#,
);

pub(crate) const WIKI_FIXTURE: &str = concat!(
    r#"{"id":"a1","kind":"article","attributes":{"title":"Gradient Descent","abstract":"Gradient descent is an iterative optimization method."},"relations":{},"sections":[{"heading":"Method","body":"The gradient points uphill. Step against the gradient. Repeat until done."},{"heading":"Uses","body":"Training relies on the gradient. Momentum helps."}]}"#,
    "\n",
    r#"{"id":"a2","kind":"article","attributes":{"title":"Paris","abstract":"Paris is the capital of France."},"relations":{},"sections":[{"heading":"History","body":"Founded long ago. Grew along the Seine."}]}"#,
    "\n",
    r#"{"id":"a3","kind":"article","attributes":{"title":"Gradient Boosting","abstract":"Gradient boosting builds ensembles of weak learners."},"relations":{},"sections":[{"heading":"Idea","body":"Fit residuals repeatedly."}]}"#,
);
