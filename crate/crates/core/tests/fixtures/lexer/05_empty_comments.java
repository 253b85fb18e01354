// file header
package a.b;

import java.util.*;

public class EmptyComments {
    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;
}
