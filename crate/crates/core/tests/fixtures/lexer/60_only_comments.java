// nothing but comments
/* and a block */
/** and javadoc */
